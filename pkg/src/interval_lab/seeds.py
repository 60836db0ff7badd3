import hashlib


def derive_seed(master, *labels):
    """Stable 63-bit seed from a master seed and a label path."""
    text = ":".join([str(master), *map(str, labels)])
    digest = hashlib.blake2b(text.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1
