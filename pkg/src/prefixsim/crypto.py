"""Signing, multi-signature aggregation, and hashing backends.

Two interchangeable schemes sit behind one interface:

* :class:`MacScheme` -- deterministic keyed-MAC signatures with a
  verifier-side key registry.  Fast and fully reproducible; the default
  for simulations and property suites.
* :class:`Ed25519Scheme` -- real asymmetric signatures for integration
  realism (backed by the ``cryptography`` package).

Every signed byte string is prefixed by a domain tag: a message kind plus
the protocol instance identifier, so votes can never be replayed across
rounds, views, or slots.  Aggregation is structured concatenation: the
aggregate keeps the signer set and each signer's exact message (vectors,
so the wire layer can store them in shared-prefix compressed form) and
verification re-checks every constituent.
"""

from __future__ import annotations

import hashlib
import hmac as hmac_mod
from dataclasses import dataclass
from typing import Iterable, Tuple

from . import encoding
from .prefixes import Vector

# Message kinds (domain-separation tags).
VOTE1 = "vote-1"
VOTE2 = "vote-2"
VOTE3 = "vote-3"
VOTE4 = "vote-4"
NEW_VIEW = "new-view"
EMPTY_VIEW = "empty-view"
NEW_COMMIT = "new-commit"
PROPOSAL = "proposal"

KINDS = (VOTE1, VOTE2, VOTE3, VOTE4, NEW_VIEW, EMPTY_VIEW, NEW_COMMIT, PROPOSAL)

DIGEST_SIZE = 16

#: Distinguished digest of the absent value; never equals the digest of
#: real content (truncated SHA-256 of actual bytes is never all zero in
#: any corpus we care about).
HBOT = b"\x00" * DIGEST_SIZE


def hash_bytes(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()[:DIGEST_SIZE]


def tag_bytes(kind: str, instance: tuple) -> bytes:
    out: list = []
    encoding.write_bytes(out, kind.encode())
    encoding.write_uint(out, len(instance))
    for part in instance:
        if isinstance(part, int):
            out.append(b"i")
            encoding.write_uint(out, part)
        else:
            out.append(b"s")
            encoding.write_bytes(out, str(part).encode())
    return b"".join(out)


class KeyError_(Exception):
    """Unknown party or key not held by this signer."""


@dataclass(frozen=True)
class Signature:
    signer: int
    blob: bytes


@dataclass(frozen=True)
class AggregateSignature:
    """A set of signatures over per-signer messages under one domain tag.

    ``messages[i]`` is the exact vector signed by ``signers[i]``.  The
    blob is the concatenation of the constituent signature blobs in
    signer order; verification recomputes each signer's tagged message.
    """

    kind: str
    instance: tuple
    signers: Tuple[int, ...]
    messages: Tuple[Vector, ...]
    blob: bytes


class AggregationError(Exception):
    pass


class Scheme:
    """Common signing interface; subclasses provide the primitives."""

    name = "abstract"
    sig_size = 0

    def __init__(self, n: int):
        self.n = n

    def _raw_sign(self, party: int, payload: bytes) -> bytes:
        raise NotImplementedError

    def _raw_verify(self, party: int, payload: bytes, blob: bytes) -> bool:
        raise NotImplementedError

    def _check_party(self, party: int) -> None:
        if not 0 <= party < self.n:
            raise KeyError_(f"unknown party {party}")

    def sign(self, party: int, kind: str, instance: tuple, message: bytes) -> Signature:
        self._check_party(party)
        payload = tag_bytes(kind, instance) + message
        return Signature(party, self._raw_sign(party, payload))

    def verify(self, party: int, kind: str, instance: tuple, message: bytes, sig: Signature) -> bool:
        if sig.signer != party or not 0 <= party < self.n:
            return False
        if len(sig.blob) != self.sig_size:
            return False
        payload = tag_bytes(kind, instance) + message
        return self._raw_verify(party, payload, sig.blob)

    def sign_vector(self, party: int, kind: str, instance: tuple, vec: Vector) -> Signature:
        return self.sign(party, kind, instance, encoding.encode_vector(vec))

    def verify_vector(self, party: int, kind: str, instance: tuple, vec: Vector, sig: Signature) -> bool:
        return self.verify(party, kind, instance, encoding.encode_vector(vec), sig)

    def aggregate(
        self,
        kind: str,
        instance: tuple,
        entries: Iterable[Tuple[int, Vector, Signature]],
    ) -> AggregateSignature:
        """Combine verified (party, vector, signature) entries.

        Entries are sorted by party id; duplicate signers and invalid
        constituent signatures are aggregation errors.
        """
        ordered = sorted(entries, key=lambda e: e[0])
        signers = tuple(party for party, _, _ in ordered)
        if len(set(signers)) != len(signers):
            raise AggregationError("duplicate signer")
        for party, vec, sig in ordered:
            if not self.verify_vector(party, kind, instance, vec, sig):
                raise AggregationError(f"invalid input signature from {party}")
        blob = b"".join(sig.blob for _, _, sig in ordered)
        messages = tuple(vec for _, vec, _ in ordered)
        return AggregateSignature(kind, instance, signers, messages, blob)

    def verify_aggregate(self, agg: AggregateSignature) -> bool:
        if len(set(agg.signers)) != len(agg.signers):
            return False
        if len(agg.messages) != len(agg.signers):
            return False
        if len(agg.blob) != self.sig_size * len(agg.signers):
            return False
        for idx, (party, vec) in enumerate(zip(agg.signers, agg.messages)):
            blob = agg.blob[idx * self.sig_size : (idx + 1) * self.sig_size]
            sig = Signature(party, blob)
            if not self.verify_vector(party, agg.kind, agg.instance, vec, sig):
                return False
        return True

    def restricted(self, parties) -> "RestrictedSigner":
        return RestrictedSigner(self, frozenset(parties))


class RestrictedSigner:
    """Signing handle limited to a fixed party set.

    Handed to adversaries so Byzantine strategies can never emit messages
    signed with honest keys.
    """

    def __init__(self, scheme: Scheme, parties: frozenset):
        self._scheme = scheme
        self.parties = parties

    def sign(self, party: int, kind: str, instance: tuple, message: bytes) -> Signature:
        if party not in self.parties:
            raise KeyError_(f"party {party} key not held")
        return self._scheme.sign(party, kind, instance, message)

    def sign_vector(self, party: int, kind: str, instance: tuple, vec: Vector) -> Signature:
        if party not in self.parties:
            raise KeyError_(f"party {party} key not held")
        return self._scheme.sign_vector(party, kind, instance, vec)


class MacScheme(Scheme):
    """HMAC-SHA256 test scheme with a shared verifier-side key registry."""

    name = "mac"
    sig_size = 16

    def __init__(self, n: int, seed: bytes = b"prefixsim-mac"):
        super().__init__(n)
        self._keys = [hashlib.sha256(seed + b"|" + str(i).encode()).digest() for i in range(n)]

    def _raw_sign(self, party: int, payload: bytes) -> bytes:
        return hmac_mod.digest(self._keys[party], payload, "sha256")[: self.sig_size]

    def _raw_verify(self, party: int, payload: bytes, blob: bytes) -> bool:
        return hmac_mod.compare_digest(self._raw_sign(party, payload), blob)


class Ed25519Scheme(Scheme):
    """Ed25519 signatures with deterministic per-party keys."""

    name = "ed25519"
    sig_size = 64

    def __init__(self, n: int, seed: bytes = b"prefixsim-ed25519"):
        super().__init__(n)
        from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

        self._private = []
        self._public = []
        for i in range(n):
            material = hashlib.sha256(seed + b"|" + str(i).encode()).digest()
            key = Ed25519PrivateKey.from_private_bytes(material)
            self._private.append(key)
            self._public.append(key.public_key())

    def _raw_sign(self, party: int, payload: bytes) -> bytes:
        return self._private[party].sign(payload)

    def _raw_verify(self, party: int, payload: bytes, blob: bytes) -> bool:
        from cryptography.exceptions import InvalidSignature

        try:
            self._public[party].verify(blob, payload)
            return True
        except InvalidSignature:
            return False


SCHEMES = {"mac": MacScheme, "ed25519": Ed25519Scheme}


def make_scheme(name: str, n: int) -> Scheme:
    try:
        return SCHEMES[name](n)
    except KeyError:
        raise ValueError(f"unknown crypto backend {name!r}") from None
