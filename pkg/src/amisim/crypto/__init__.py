from amisim.crypto.paillier import (
    Ciphertext,
    PaillierPrivateKey,
    PaillierPublicKey,
    READING_SCALE,
    decode_reading,
    decrypt,
    encode_reading,
    encrypt,
    hom_add,
    paillier_keygen,
)
from amisim.crypto.pairing import ExponentSuite, make_suite
from amisim.crypto.signatures import (
    SigKeypair,
    Signature,
    batch_verify,
    canonical_payload,
    sig_keygen,
    sign,
    verify_single,
)

__all__ = [
    "Ciphertext",
    "ExponentSuite",
    "PaillierPrivateKey",
    "PaillierPublicKey",
    "READING_SCALE",
    "SigKeypair",
    "Signature",
    "batch_verify",
    "canonical_payload",
    "decode_reading",
    "decrypt",
    "encode_reading",
    "encrypt",
    "hom_add",
    "make_suite",
    "paillier_keygen",
    "sig_keygen",
    "sign",
    "verify_single",
]
