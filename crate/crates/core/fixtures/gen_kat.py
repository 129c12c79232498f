"""Regenerates kat_suite01.json from Python's hashlib/hmac and `cryptography`.

Published vectors (FIPS 180-2, RFC 4231, RFC 5869, RFC 8439, RFC 8032) are
asserted first so the generator itself is checked before it emits anything.
Run: python3 gen_kat.py > kat_suite01.json
"""
import hashlib
import hmac
import json

from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305

H = bytes.fromhex
P61 = (1 << 61) - 1


def hkdf32(ikm, info, salt=b""):
    prk = hmac.new(salt or b"\x00" * 32, ikm, hashlib.sha256).digest()
    return hmac.new(prk, info + b"\x01", hashlib.sha256).digest()


# published checks
assert hashlib.sha256(b"abc").hexdigest() == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
assert hmac.new(b"\x0b" * 20, b"Hi There", hashlib.sha256).hexdigest() == \
    "b0344c61d8db38535ca8afceaf0bf12b881dc200c9833da726e9376c2e32cff7"
assert hkdf32(b"\x0b" * 22, b"").hex() == "8da4e775a563c18f715f802a063c5a31b8a11f5c5ee1879ec3454e5f3c738d2d"
rfc8439_pt = (b"Ladies and Gentlemen of the class of '99: If I could offer you only one tip "
              b"for the future, sunscreen would be it.")
rfc8439 = ChaCha20Poly1305(bytes(range(0x80, 0xa0))).encrypt(
    H("070000004041424344454647"), rfc8439_pt, H("50515253c0c1c2c3c4c5c6c7"))
assert rfc8439[-16:].hex() == "1ae10b594f09e26a7e902ecbd0600691"
sk1 = Ed25519PrivateKey.from_private_bytes(H("9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60"))
assert sk1.public_key().public_bytes(serialization.Encoding.Raw, serialization.PublicFormat.Raw).hex() == \
    "d75a980182b10ab7d54bfed3c964073a0ee172f3daa62325af021a68f707511a"

out = {"suite": 1}

out["sha256"] = [
    {"input": m.hex(), "digest": hashlib.sha256(m).hexdigest()}
    for m in [b"", b"abc", b"abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq", bytes(range(256))]
]

seeds = [bytes(32), bytes(range(32)), hashlib.sha256(b"szkat-seed").digest()]
out["token"] = []
for seed in seeds:
    for time, window in [(0, 30), (100, 30), (131, 30), (1700000000, 30), (1700000000, 1), (2**64 - 1, 7)]:
        idx = time // window
        tk = hmac.new(seed, idx.to_bytes(8, "big"), hashlib.sha256).digest()[:16]
        out["token"].append({"seed": seed.hex(), "time": time, "window": window, "window_index": idx, "tk": tk.hex()})

out["kdf"] = [
    {"input": ikm.hex(), "label": label.decode(), "key": hkdf32(ikm, label).hex()}
    for ikm in [b"", b"\x0b" * 22, bytes(range(16)), bytes(range(64))]
    for label in [b"", b"SZ-DEM", b"SZ-TOKEN"]
]

out["aead"] = []
for key, nonce, pt in [
    (bytes(32), bytes(12), b""),
    (bytes(range(0x80, 0xa0)), H("070000004041424344454647"), rfc8439_pt),
    (hashlib.sha256(b"k").digest(), bytes(range(12)), b"zone inner blob"),
]:
    ct = ChaCha20Poly1305(key).encrypt(nonce, pt, b"\x01")
    out["aead"].append({"key": key.hex(), "nonce": nonce.hex(), "plaintext": pt.hex(), "ciphertext": ct.hex()})

out["ed25519"] = []
for secret, msg in [
    (H("9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60"), b""),
    (H("4ccd089b28ff96da9db6c346ec114e0f5b8a319f35aba624da8cf6ed4fb8a6fb"), H("72")),
    (hashlib.sha256(b"sza").digest(), hashlib.sha256(b"tk").digest()),
]:
    sk = Ed25519PrivateKey.from_private_bytes(secret)
    pub = sk.public_key().public_bytes(serialization.Encoding.Raw, serialization.PublicFormat.Raw)
    out["ed25519"].append({"secret": secret.hex(), "public": pub.hex(), "message": msg.hex(), "signature": sk.sign(msg).hex()})
assert out["ed25519"][0]["signature"] == (
    "e5564300c360ac729086e2cc806e828a84877f1eb8e5d974d873e065224901555fb8821590a33bacc61e39701cf9b46bd25bf5f0595bbe24655141438e7a100b")

out["hash_to_group"] = [
    {"attribute": a, "exponent": int.from_bytes(hashlib.sha256(a.encode()).digest(), "big") % P61}
    for a in ["a", "officer", "rangemaster", "role:range-7"]
]

print(json.dumps(out, indent=1))
