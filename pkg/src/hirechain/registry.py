"""Participant identities, roles, signing schemes and permission grants.

A participant is known by the double hash of its public key. Permissions are
never mutated directly: they are granted on-chain and the effective table is
rebuilt by folding grant transactions, so any node can reconstruct who may
connect, send, mine or attest purely from its copy of the chain.
"""

from __future__ import annotations

import enum
import hmac
import hashlib
from dataclasses import dataclass
from typing import Iterable, Iterator, TYPE_CHECKING

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .errors import BadKeyLength, NoAuthorityRegistered, SignatureFailure, UnknownParticipant
from .hashing import double_hash

if TYPE_CHECKING:
    from .recruit import Claim


class Role(enum.IntEnum):
    RECRUITING_COMPANY = 0
    EMPLOYER = 1
    APPLICANT = 2
    HEALTH_AUTHORITY = 3
    LAW_AGENCY = 4

    @property
    def label(self) -> str:
        return _ROLE_LABELS[self]

    @classmethod
    def from_label(cls, label: str) -> "Role":
        try:
            return _ROLE_BY_LABEL[label]
        except KeyError:
            raise ValueError(f"unknown role {label!r}") from None


_ROLE_LABELS = {
    Role.RECRUITING_COMPANY: "RecruitingCompany",
    Role.EMPLOYER: "Employer",
    Role.APPLICANT: "Applicant",
    Role.HEALTH_AUTHORITY: "HealthAuthority",
    Role.LAW_AGENCY: "LawAgency",
}
_ROLE_BY_LABEL = {label: role for role, label in _ROLE_LABELS.items()}

#: Roles allowed to hold the Attest right.
AUTHORITY_ROLES = frozenset({Role.EMPLOYER, Role.HEALTH_AUTHORITY, Role.LAW_AGENCY})


class Right(enum.IntFlag):
    CONNECT = 1
    SEND = 2
    MINE = 4
    ATTEST = 8


ALL_RIGHTS = Right.CONNECT | Right.SEND | Right.MINE | Right.ATTEST


def rights_from_names(names: Iterable[str]) -> Right:
    out = Right(0)
    for name in names:
        try:
            out |= Right[name.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown right {name!r}") from None
    return out


# --- signature schemes ------------------------------------------------------

SCHEME_HMAC = 0      # symmetric test scheme: public key == secret key
SCHEME_ED25519 = 1   # reference scheme

_ED25519_KEY_LEN = 32
_HMAC_MAX_KEY_LEN = 64


@dataclass(frozen=True)
class Signature:
    scheme_id: int
    data: bytes

    @staticmethod
    def empty(scheme_id: int = SCHEME_ED25519) -> "Signature":
        return Signature(scheme_id, b"")


def _check_secret(secret_key: bytes, scheme_id: int) -> None:
    if scheme_id == SCHEME_ED25519:
        if len(secret_key) != _ED25519_KEY_LEN:
            raise BadKeyLength("ed25519 secret key must be 32 bytes")
    elif scheme_id == SCHEME_HMAC:
        if not 1 <= len(secret_key) <= _HMAC_MAX_KEY_LEN:
            raise BadKeyLength("hmac key must be 1..64 bytes")
    else:
        raise BadKeyLength(f"unknown scheme id {scheme_id}")


def check_public_key(public_key: bytes, scheme_id: int) -> None:
    if scheme_id == SCHEME_ED25519:
        if len(public_key) != _ED25519_KEY_LEN:
            raise BadKeyLength("ed25519 public key must be 32 bytes")
    elif scheme_id == SCHEME_HMAC:
        if not 1 <= len(public_key) <= _HMAC_MAX_KEY_LEN:
            raise BadKeyLength("hmac key must be 1..64 bytes")
    else:
        raise BadKeyLength(f"unknown scheme id {scheme_id}")


def derive_public_key(secret_key: bytes, scheme_id: int = SCHEME_ED25519) -> bytes:
    _check_secret(secret_key, scheme_id)
    if scheme_id == SCHEME_ED25519:
        private = Ed25519PrivateKey.from_private_bytes(secret_key)
        return private.public_key().public_bytes_raw()
    return secret_key


def sign(secret_key: bytes, message: bytes, scheme_id: int = SCHEME_ED25519) -> Signature:
    """Sign a message; ed25519 signing is deterministic, so fixtures are stable."""
    _check_secret(secret_key, scheme_id)
    if scheme_id == SCHEME_ED25519:
        return Signature(scheme_id, Ed25519PrivateKey.from_private_bytes(secret_key).sign(message))
    return Signature(scheme_id, hmac.new(secret_key, message, hashlib.sha256).digest())


def verify(public_key: bytes, message: bytes, signature: Signature) -> bool:
    check_public_key(public_key, signature.scheme_id)
    if signature.scheme_id == SCHEME_ED25519:
        try:
            Ed25519PublicKey.from_public_bytes(public_key).verify(signature.data, message)
            return True
        except InvalidSignature:
            return False
    expected = hmac.new(public_key, message, hashlib.sha256).digest()
    return hmac.compare_digest(expected, signature.data)


def participant_id(public_key: bytes) -> bytes:
    """A participant's 32-byte identity: the double hash of its public key."""
    return double_hash(public_key)


# --- directory ---------------------------------------------------------------

@dataclass(frozen=True)
class Participant:
    id: bytes
    name: str
    role: Role
    public_key: bytes
    scheme_id: int


@dataclass(frozen=True)
class PermissionGrant:
    """On-chain payload: each entry replaces the grantor's grant for that subject."""

    grants: tuple[tuple[bytes, Right], ...]


class Directory:
    """Known participants plus the permission table folded from the chain."""

    def __init__(self) -> None:
        self._by_id: dict[bytes, Participant] = {}
        self._by_name: dict[str, Participant] = {}
        self._order: list[bytes] = []
        # (grantor, subject) -> latest granted rights
        self._grants: dict[tuple[bytes, bytes], Right] = {}

    def register(
        self,
        role: Role,
        public_key: bytes,
        name: str,
        scheme_id: int = SCHEME_ED25519,
    ) -> bytes:
        """Add a participant; registering the same key again is a no-op."""
        if len(public_key) == 0:
            raise BadKeyLength("empty public key")
        check_public_key(public_key, scheme_id)
        pid = participant_id(public_key)
        existing = self._by_id.get(pid)
        if existing is not None:
            if existing.role != role:
                raise UnknownParticipant(
                    f"key already registered to {existing.name!r} with role {existing.role.label}"
                )
            return pid
        if name in self._by_name:
            raise UnknownParticipant(f"participant name {name!r} already taken")
        participant = Participant(pid, name, role, bytes(public_key), scheme_id)
        self._by_id[pid] = participant
        self._by_name[name] = participant
        self._order.append(pid)
        return pid

    def get(self, pid: bytes) -> Participant | None:
        return self._by_id.get(pid)

    def require(self, pid: bytes) -> Participant:
        participant = self._by_id.get(pid)
        if participant is None:
            raise UnknownParticipant(pid.hex())
        return participant

    def by_name(self, name: str) -> Participant | None:
        return self._by_name.get(name)

    def display_name(self, pid: bytes) -> str:
        participant = self._by_id.get(pid)
        return participant.name if participant is not None else pid.hex()

    def __iter__(self) -> Iterator[Participant]:
        return (self._by_id[pid] for pid in self._order)

    def with_role(self, role: Role) -> list[Participant]:
        return [p for p in self if p.role == role]

    # permissions ---------------------------------------------------------

    def apply_grant(
        self,
        grantor: bytes,
        subject: bytes,
        rights: Right,
        *,
        bootstrap: bool = False,
    ) -> bool:
        """Fold one grant entry; invalid grants are ignored so replay is total."""
        if grantor not in self._by_id or subject not in self._by_id:
            return False
        if not bootstrap and not self.has_right(grantor, Right.MINE):
            return False
        if Right.ATTEST in rights and self._by_id[subject].role not in AUTHORITY_ROLES:
            return False
        self._grants[(grantor, subject)] = rights
        return True

    def effective_rights(self, subject: bytes) -> Right:
        out = Right(0)
        for (_, granted_to), rights in self._grants.items():
            if granted_to == subject:
                out |= rights
        return out

    def has_right(self, subject: bytes, right: Right) -> bool:
        return right in self.effective_rights(subject)

    def clear_grants(self) -> None:
        self._grants.clear()

    def snapshot_grants(self) -> dict[tuple[bytes, bytes], Right]:
        return dict(self._grants)


def authority_for(claim: "Claim", directory: Directory) -> bytes:
    """Resolve which participant is responsible for attesting a claim.

    Health and criminal records belong to the registered health authority and
    law agency; everything else is answered by the employer-role participant
    the claim itself names as issuer.
    """
    role = claim.kind.authority_role
    if role is not None:
        for participant in directory.with_role(role):
            if directory.has_right(participant.id, Right.ATTEST):
                return participant.id
        raise NoAuthorityRegistered(f"no {role.label} with attest right registered")
    issuer = directory.get(claim.issuer)
    if issuer is None or issuer.role != Role.EMPLOYER:
        raise NoAuthorityRegistered("claim issuer is not a registered employer")
    if not directory.has_right(issuer.id, Right.ATTEST):
        raise NoAuthorityRegistered(f"{issuer.name} holds no attest right")
    return issuer.id


# --- keyring -------------------------------------------------------------------

class Keyring:
    """Secret keys held by the simulator / CLI, addressed by participant name."""

    def __init__(self) -> None:
        self._keys: dict[str, tuple[bytes, int]] = {}

    def add(self, name: str, secret_key: bytes, scheme_id: int = SCHEME_ED25519) -> None:
        _check_secret(secret_key, scheme_id)
        self._keys[name] = (bytes(secret_key), scheme_id)

    def has(self, name: str) -> bool:
        return name in self._keys

    def sign_as(self, name: str, message: bytes) -> Signature:
        try:
            secret, scheme_id = self._keys[name]
        except KeyError:
            raise SignatureFailure(f"no key for {name!r}") from None
        return sign(secret, message, scheme_id)


def sign_by_id(keyring: Keyring, directory: Directory, pid: bytes, message: bytes) -> Signature:
    participant = directory.get(pid)
    if participant is None:
        raise SignatureFailure(f"unknown participant {pid.hex()}")
    return keyring.sign_as(participant.name, message)


# --- roster files -----------------------------------------------------------------

@dataclass(frozen=True)
class RosterEntry:
    role: Role
    name: str
    secret_seed: bytes
    scheme_id: int = SCHEME_ED25519

    def public_key(self) -> bytes:
        return derive_public_key(self.secret_seed, self.scheme_id)


def parse_roster(text: str) -> list[RosterEntry]:
    """Parse `role,name,key_hex` lines; blank lines and # comments are skipped."""
    from .errors import BadRoster

    entries: list[RosterEntry] = []
    seen_names: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3:
            raise BadRoster(f"line {lineno}: expected role,name,key_hex")
        role_label, name, key_hex = parts
        try:
            role = Role.from_label(role_label)
        except ValueError as exc:
            raise BadRoster(f"line {lineno}: {exc}") from None
        if not name:
            raise BadRoster(f"line {lineno}: empty participant name")
        if name in seen_names:
            raise BadRoster(f"line {lineno}: duplicate participant {name!r}")
        try:
            seed = bytes.fromhex(key_hex)
        except ValueError:
            raise BadRoster(f"line {lineno}: key is not valid hex") from None
        if len(seed) != _ED25519_KEY_LEN:
            raise BadRoster(f"line {lineno}: key must be {_ED25519_KEY_LEN} bytes of hex")
        seen_names.add(name)
        entries.append(RosterEntry(role, name, seed))
    if not entries:
        raise BadRoster("roster is empty")
    return entries


def build_directory(entries: Iterable[RosterEntry]) -> tuple[Directory, Keyring]:
    """Register a roster and collect its secret keys."""
    directory = Directory()
    keyring = Keyring()
    for entry in entries:
        directory.register(entry.role, entry.public_key(), entry.name, entry.scheme_id)
        keyring.add(entry.name, entry.secret_seed, entry.scheme_id)
    return directory, keyring
