from interval_lab.cli import main

raise SystemExit(main())
