"""Hash-and-sign signatures with pairing-based batch verification.

A signer with secret x publishes Y = x*P (P the public-key-side generator)
and signs a payload as sigma = x*H(payload). A batch of w signatures
verifies in one shot via

    e(sum sigma_i, P) == prod e(H(payload_i), Y_i)

which both backends evaluate as a single pairing product against one
target-group identity check, so a batch costs one final exponentiation.
"""

from __future__ import annotations

from dataclasses import dataclass

from amisim.errors import CryptoError


@dataclass(frozen=True)
class SigKeypair:
    x: int
    public: object  # Y = x * P, a G2-side element of the active suite


@dataclass(frozen=True)
class Signature:
    sigma: object  # G1-side element of the active suite


def sig_keygen(suite, rng) -> SigKeypair:
    x = suite.random_scalar(rng)
    public = x * suite.g2_generator()
    if public.is_identity():
        raise CryptoError("degenerate signing key")
    return SigKeypair(x=x, public=public)


def canonical_payload(ciphertext_value: int, ts_ms: int) -> bytes:
    """Bit-exact wire encoding of C || TS.

    4-byte big-endian length of the ciphertext's big-endian magnitude,
    the magnitude bytes, then the timestamp as 8-byte big-endian UNIX
    milliseconds.
    """
    if ciphertext_value < 0:
        raise CryptoError("ciphertext value must be non-negative")
    if not 0 <= ts_ms < 1 << 64:
        raise CryptoError("timestamp out of range")
    c_bytes = ciphertext_value.to_bytes((ciphertext_value.bit_length() + 7) // 8 or 1, "big")
    return len(c_bytes).to_bytes(4, "big") + c_bytes + ts_ms.to_bytes(8, "big")


def sign(x: int, payload: bytes, suite) -> Signature:
    return Signature(sigma=x * suite.hash_to_g1(payload))


def verify_single(signature: Signature, public, payload: bytes, suite) -> bool:
    """Check e(sigma, P) == e(H(payload), Y); identity sigma is rejected."""
    if signature.sigma.is_identity():
        return False
    h = suite.hash_to_g1(payload)
    check = suite.pair_product(
        [(signature.sigma, suite.g2_generator()), (-h, public)]
    )
    return check.is_one()


def batch_verify(items, suite) -> bool:
    """Verify [(signature, public, payload), ...] as one batched equation."""
    items = list(items)
    if not items:
        raise CryptoError("batch_verify requires at least one item")
    sigma_sum = suite.g1_identity()
    pairs = []
    for signature, public, payload in items:
        if signature.sigma.is_identity():
            return False
        sigma_sum = sigma_sum + signature.sigma
        pairs.append((-suite.hash_to_g1(payload), public))
    check = suite.pair_product([(sigma_sum, suite.g2_generator())] + pairs)
    return check.is_one()
