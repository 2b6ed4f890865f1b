"""Applicant verification, screening and ranking.

Each claim an applicant makes is checked against the responsible authority's
own records: a byte-identical record confirms it, a record about the same
subject and kind that differs refutes it, and silence leaves it unknown.
Profiles with refuted claims, adverse law records or adverse performance
reports are discarded; the rest are scored against the hiring company's
weighted requirements and ranked.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from ._wire import Reader, Writer, decode_record, encode_record, read_record
from .errors import (
    BadTag,
    CodecError,
    MissingVerification,
    NoAuthorityRegistered,
    ParseError,
)
from .hashing import DIGEST_SIZE, ZERO_DIGEST, double_hash
from .ledger import TxKind, register_payload_codec
from .registry import (
    Directory,
    Keyring,
    Role,
    Signature,
    authority_for,
    derive_public_key,
    sign_by_id,
    verify,
)


class ClaimKind(enum.IntEnum):
    EDUCATION = 0
    EMPLOYMENT = 1
    TRAINING = 2
    CERTIFICATE = 3
    SALARY_HISTORY = 4
    PERFORMANCE = 5
    HEALTH_RECORD = 6
    CRIMINAL_RECORD = 7

    @property
    def label(self) -> str:
        return _CLAIM_LABELS[self]

    @classmethod
    def from_label(cls, label: str) -> "ClaimKind":
        try:
            return _CLAIM_BY_LABEL[label]
        except KeyError:
            raise ValueError(f"unknown claim kind {label!r}") from None

    @property
    def authority_role(self) -> Role | None:
        """Role that answers for this kind; None means the claim's named issuer."""
        if self is ClaimKind.HEALTH_RECORD:
            return Role.HEALTH_AUTHORITY
        if self is ClaimKind.CRIMINAL_RECORD:
            return Role.LAW_AGENCY
        return None


_CLAIM_LABELS = {
    ClaimKind.EDUCATION: "Education",
    ClaimKind.EMPLOYMENT: "Employment",
    ClaimKind.TRAINING: "Training",
    ClaimKind.CERTIFICATE: "Certificate",
    ClaimKind.SALARY_HISTORY: "SalaryHistory",
    ClaimKind.PERFORMANCE: "Performance",
    ClaimKind.HEALTH_RECORD: "HealthRecord",
    ClaimKind.CRIMINAL_RECORD: "CriminalRecord",
}
_CLAIM_BY_LABEL = {label: kind for kind, label in _CLAIM_LABELS.items()}


class Verdict(enum.IntEnum):
    CONFIRMED = 0
    REFUTED = 1
    UNKNOWN = 2


class DiscardReason(enum.Enum):
    FAKE_CERTIFICATE = "FakeCertificate"
    LAW_ISSUE = "LawIssue"
    BEHAVIOURAL_ISSUE = "BehaviouralIssue"
    INCONSISTENT_DATA = "InconsistentData"
    MANDATORY_UNMET = "MandatoryUnmet"

    @property
    def label(self) -> str:
        return self.value


@dataclass(frozen=True)
class Claim:
    kind: ClaimKind
    issuer: bytes
    statement: bytes
    evidence_hash: bytes


def make_claim(kind: ClaimKind, issuer: bytes, fields: Mapping[str, str]) -> Claim:
    statement = encode_record(fields)
    return Claim(kind, issuer, statement, double_hash(statement))


def statement_fields(claim: Claim) -> dict[str, str]:
    try:
        return decode_record(claim.statement)
    except CodecError:
        return {}


@dataclass(frozen=True)
class ApplicantProfile:
    applicant: bytes
    claims: tuple[Claim, ...]


@dataclass(frozen=True)
class VerificationRecord:
    claim_ref: bytes
    verdict: Verdict
    attester: bytes
    attester_signature: Signature


def verdict_digest(claim_ref: bytes, verdict: Verdict) -> bytes:
    return double_hash(claim_ref + bytes([int(verdict)]))


@dataclass(frozen=True)
class ClaimAttestation:
    """On-chain notarisation of one verification record."""

    subject: bytes
    claim_kind: ClaimKind
    claim_ref: bytes
    verdict: Verdict
    attester: bytes
    attester_signature: Signature

    def record(self) -> VerificationRecord:
        return VerificationRecord(self.claim_ref, self.verdict, self.attester, self.attester_signature)


def _encode_attestation(payload: object) -> bytes:
    assert isinstance(payload, ClaimAttestation)
    from .ledger import write_signature

    w = Writer()
    w.raw(payload.subject)
    w.u8(int(payload.claim_kind))
    w.raw(payload.claim_ref)
    w.u8(int(payload.verdict))
    w.raw(payload.attester)
    write_signature(w, payload.attester_signature)
    return w.getvalue()


def _decode_attestation(data: bytes) -> ClaimAttestation:
    from .ledger import read_signature

    r = Reader(data)
    subject = r.take(DIGEST_SIZE)
    kind_byte = r.u8()
    try:
        kind = ClaimKind(kind_byte)
    except ValueError:
        raise BadTag(f"unknown claim kind {kind_byte}") from None
    claim_ref = r.take(DIGEST_SIZE)
    verdict_byte = r.u8()
    try:
        verdict = Verdict(verdict_byte)
    except ValueError:
        raise BadTag(f"unknown verdict {verdict_byte}") from None
    attester = r.take(DIGEST_SIZE)
    signature = read_signature(r)
    r.expect_end()
    return ClaimAttestation(subject, kind, claim_ref, verdict, attester, signature)


register_payload_codec(TxKind.CLAIM_ATTESTATION, _encode_attestation, _decode_attestation)


# --- requirements ------------------------------------------------------------------

_PREDICATE_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*(>=|<=|>|<|=)\s*(.+)$")


@dataclass(frozen=True)
class Predicate:
    """`field=value` string equality, `field>=n` style integer thresholds, or
    `*` for any confirmed claim of the kind."""

    field: str | None
    op: str
    value: str

    def evaluate(self, fields: Mapping[str, str]) -> bool:
        if self.field is None:
            return True
        actual = fields.get(self.field)
        if actual is None:
            return False
        if self.op == "=":
            return actual == self.value
        try:
            left, right = int(actual), int(self.value)
        except ValueError:
            return False
        if self.op == ">=":
            return left >= right
        if self.op == "<=":
            return left <= right
        if self.op == ">":
            return left > right
        return left < right

    def __str__(self) -> str:
        return "*" if self.field is None else f"{self.field}{self.op}{self.value}"


def parse_predicate(text: str) -> Predicate:
    text = text.strip()
    if text == "*":
        return Predicate(None, "*", "")
    match = _PREDICATE_RE.match(text)
    if match is None:
        raise ValueError(f"cannot parse predicate {text!r}")
    return Predicate(match.group(1), match.group(2), match.group(3).strip())


@dataclass(frozen=True)
class RequirementItem:
    kind: ClaimKind
    predicate: Predicate
    weight: Fraction
    mandatory: bool


@dataclass(frozen=True)
class RequirementSpec:
    company: bytes
    items: tuple[RequirementItem, ...]

    def __post_init__(self) -> None:
        if not self.items:
            raise ValueError("a requirement spec needs at least one item")
        if any(item.weight < 0 for item in self.items):
            raise ValueError("requirement weights must be non-negative")


@dataclass(frozen=True)
class RankedList:
    entries: tuple[tuple[bytes, Fraction], ...]
    discarded: tuple[tuple[bytes, DiscardReason], ...]


# --- authority record stores ----------------------------------------------------------

class AuthorityStore:
    """Ground-truth records held by attesters, keyed by subject name and kind."""

    def __init__(self) -> None:
        self._records: dict[tuple[bytes, str, ClaimKind], list[bytes]] = {}

    def add(self, attester: bytes, kind: ClaimKind, fields: Mapping[str, str]) -> None:
        if "subject" not in fields:
            raise ValueError("authority records must name a subject")
        statement = encode_record(fields)
        key = (attester, fields["subject"], kind)
        bucket = self._records.setdefault(key, [])
        if statement not in bucket:
            bucket.append(statement)

    def statements(self, attester: bytes, subject: str, kind: ClaimKind) -> tuple[bytes, ...]:
        return tuple(self._records.get((attester, subject, kind), ()))


# --- verification, screening, scoring ----------------------------------------------------

def verify_claim(
    claim: Claim,
    directory: Directory,
    store: AuthorityStore,
    keyring: Keyring,
) -> VerificationRecord:
    """Ask the responsible authority about one claim and sign the verdict.

    Byte-identical stored statement: confirmed. Records for the same subject
    and kind but none identical: refuted. No records at all: unknown.
    """
    attester = authority_for(claim, directory)
    subject = statement_fields(claim).get("subject")
    if subject is None:
        verdict = Verdict.UNKNOWN
    else:
        stored = store.statements(attester, subject, claim.kind)
        if claim.statement in stored:
            verdict = Verdict.CONFIRMED
        elif stored:
            verdict = Verdict.REFUTED
        else:
            verdict = Verdict.UNKNOWN
    signature = sign_by_id(keyring, directory, attester, verdict_digest(claim.evidence_hash, verdict))
    return VerificationRecord(claim.evidence_hash, verdict, attester, signature)


def _adverse(claim: Claim) -> bool:
    return statement_fields(claim).get("adverse") == "true"


_REFUTED_REASONS = {
    ClaimKind.EDUCATION: DiscardReason.FAKE_CERTIFICATE,
    ClaimKind.TRAINING: DiscardReason.FAKE_CERTIFICATE,
    ClaimKind.CERTIFICATE: DiscardReason.FAKE_CERTIFICATE,
    ClaimKind.CRIMINAL_RECORD: DiscardReason.LAW_ISSUE,
    ClaimKind.PERFORMANCE: DiscardReason.BEHAVIOURAL_ISSUE,
}


def screen(
    profile: ApplicantProfile,
    records: Sequence[VerificationRecord],
) -> DiscardReason | None:
    """Decide whether a profile survives; None means it passes.

    Claims are checked in profile order and the first offence names the
    reason: a statement that does not match its own evidence hash, any
    refuted claim, or a confirmed adverse criminal or performance record.
    """
    by_ref = {record.claim_ref: record for record in records}
    for claim in profile.claims:
        if double_hash(claim.statement) != claim.evidence_hash:
            return DiscardReason.INCONSISTENT_DATA
        record = by_ref.get(claim.evidence_hash)
        if record is None:
            raise MissingVerification(f"claim {claim.evidence_hash.hex()} has no verification record")
        if record.verdict is Verdict.REFUTED:
            return _REFUTED_REASONS.get(claim.kind, DiscardReason.INCONSISTENT_DATA)
        if record.verdict is Verdict.CONFIRMED and _adverse(claim):
            if claim.kind is ClaimKind.CRIMINAL_RECORD:
                return DiscardReason.LAW_ISSUE
            if claim.kind is ClaimKind.PERFORMANCE:
                return DiscardReason.BEHAVIOURAL_ISSUE
    return None


def matching_score(
    profile: ApplicantProfile,
    records: Sequence[VerificationRecord],
    spec: RequirementSpec,
) -> Fraction | None:
    """Weighted sum over satisfied requirement items; None when a mandatory
    item stays unsatisfied."""
    by_ref = {record.claim_ref: record for record in records}
    confirmed: dict[ClaimKind, list[dict[str, str]]] = {}
    for claim in profile.claims:
        record = by_ref.get(claim.evidence_hash)
        if record is not None and record.verdict is Verdict.CONFIRMED:
            confirmed.setdefault(claim.kind, []).append(statement_fields(claim))
    score = Fraction(0)
    for item in spec.items:
        satisfied = any(item.predicate.evaluate(fields) for fields in confirmed.get(item.kind, ()))
        if satisfied:
            score += item.weight
        elif item.mandatory:
            return None
    return score


@dataclass(frozen=True)
class Evaluation:
    ranked: RankedList
    attestations: tuple[ClaimAttestation, ...]


def evaluate_applicants(
    profiles: Sequence[ApplicantProfile],
    directory: Directory,
    store: AuthorityStore,
    spec: RequirementSpec,
    keyring: Keyring,
) -> Evaluation:
    """Verify, screen and score every profile; also returns the signed
    attestations ready for on-chain notarisation.

    Each distinct evidence hash is verified once; when a profile repeats a
    statement under different issuers, the first occurrence defines the claim.
    An unresolvable authority downgrades the claim to an unsigned unknown
    verdict instead of aborting the batch; those records are not notarised
    because no attester exists to author them.
    """
    entries: list[tuple[bytes, Fraction]] = []
    discarded: list[tuple[bytes, DiscardReason]] = []
    attestations: list[ClaimAttestation] = []
    for profile in profiles:
        records: list[VerificationRecord] = []
        seen: set[bytes] = set()
        for claim in profile.claims:
            if claim.evidence_hash in seen:
                continue
            seen.add(claim.evidence_hash)
            try:
                record = verify_claim(claim, directory, store, keyring)
            except NoAuthorityRegistered:
                record = VerificationRecord(
                    claim.evidence_hash, Verdict.UNKNOWN, ZERO_DIGEST, Signature.empty()
                )
            records.append(record)
            if record.attester != ZERO_DIGEST:
                attestations.append(
                    ClaimAttestation(
                        profile.applicant,
                        claim.kind,
                        record.claim_ref,
                        record.verdict,
                        record.attester,
                        record.attester_signature,
                    )
                )
        reason = screen(profile, records)
        if reason is not None:
            discarded.append((profile.applicant, reason))
            continue
        score = matching_score(profile, records, spec)
        if score is None:
            discarded.append((profile.applicant, DiscardReason.MANDATORY_UNMET))
        else:
            entries.append((profile.applicant, score))
    entries.sort(key=lambda entry: (-entry[1], entry[0]))
    return Evaluation(RankedList(tuple(entries), tuple(discarded)), tuple(attestations))


def rank_applicants(
    profiles: Sequence[ApplicantProfile],
    directory: Directory,
    store: AuthorityStore,
    spec: RequirementSpec,
    keyring: Keyring,
) -> RankedList:
    return evaluate_applicants(profiles, directory, store, spec, keyring).ranked


# --- input files -----------------------------------------------------------------------

def applicant_key_seed(name: str) -> bytes:
    """Deterministic signing seed for applicants named only in input files."""
    return double_hash(b"applicant-key:" + name.encode("utf-8"))


def ensure_applicant(
    name: str,
    directory: Directory,
    keyring: Keyring | None = None,
) -> bytes:
    existing = directory.by_name(name)
    if existing is not None:
        return existing.id
    seed = applicant_key_seed(name)
    pid = directory.register(Role.APPLICANT, derive_public_key(seed), name)
    if keyring is not None:
        keyring.add(name, seed)
    return pid


def parse_fields(text: str) -> dict[str, str]:
    fields: dict[str, str] = {}
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        key, sep, value = part.partition("=")
        if not sep or not key.strip():
            raise ValueError(f"cannot parse field {part!r}")
        fields[key.strip()] = value.strip()
    return fields


def parse_applicants_file(
    text: str,
    directory: Directory,
    keyring: Keyring | None = None,
) -> list[ApplicantProfile]:
    """Read `applicant,kind,issuer,field=value;...` claim lines into profiles.

    Applicants named here are registered on the fly with a derived key; the
    claim subject field is filled in from the applicant name.
    """
    claims_by_applicant: dict[bytes, list[Claim]] = {}
    order: list[bytes] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",", 3)
        if len(parts) != 4:
            raise ParseError(f"line {lineno}: expected applicant,kind,issuer,fields")
        applicant_name, kind_label, issuer_name, field_text = (p.strip() for p in parts)
        try:
            kind = ClaimKind.from_label(kind_label)
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}") from None
        issuer = directory.by_name(issuer_name)
        if issuer is None:
            raise ParseError(f"line {lineno}: unknown issuer {issuer_name!r}")
        try:
            fields = parse_fields(field_text)
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}") from None
        fields.setdefault("subject", applicant_name)
        pid = ensure_applicant(applicant_name, directory, keyring)
        if pid not in claims_by_applicant:
            claims_by_applicant[pid] = []
            order.append(pid)
        claims_by_applicant[pid].append(make_claim(kind, issuer.id, fields))
    return [ApplicantProfile(pid, tuple(claims_by_applicant[pid])) for pid in order]


def parse_requirements_file(text: str, company: bytes) -> RequirementSpec:
    """Read `kind,predicate,weight,mandatory` lines into a requirement spec."""
    items: list[RequirementItem] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 4:
            raise ParseError(f"line {lineno}: expected kind,predicate,weight,mandatory")
        try:
            kind = ClaimKind.from_label(parts[0])
            predicate = parse_predicate(parts[1])
            weight = Fraction(parts[2])
        except (ValueError, ZeroDivisionError) as exc:
            raise ParseError(f"line {lineno}: {exc}") from None
        flag = parts[3].lower()
        if flag not in ("true", "false", "yes", "no", "1", "0"):
            raise ParseError(f"line {lineno}: mandatory must be true or false")
        items.append(RequirementItem(kind, predicate, weight, flag in ("true", "yes", "1")))
    if not items:
        raise ParseError("requirement file is empty")
    return RequirementSpec(company, tuple(items))


def parse_records_file(text: str) -> list[tuple[str, ClaimKind, dict[str, str]]]:
    """Read `subject,kind,field=value;...` ground-truth lines for one authority."""
    rows: list[tuple[str, ClaimKind, dict[str, str]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",", 2)
        if len(parts) != 3:
            raise ParseError(f"line {lineno}: expected subject,kind,fields")
        subject, kind_label, field_text = (p.strip() for p in parts)
        try:
            kind = ClaimKind.from_label(kind_label)
            fields = parse_fields(field_text)
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}") from None
        fields.setdefault("subject", subject)
        rows.append((subject, kind, fields))
    return rows


def export_ranked_list(ranked: RankedList, directory: Directory) -> str:
    """Render the `rank,applicant,score` table plus the discarded section."""
    lines = ["rank,applicant,score"]
    for position, (applicant, score) in enumerate(ranked.entries, start=1):
        lines.append(f"{position},{directory.display_name(applicant)},{score}")
    lines.append("discarded")
    lines.append("applicant,reason")
    for applicant, reason in ranked.discarded:
        lines.append(f"{directory.display_name(applicant)},{reason.label}")
    return "\n".join(lines) + "\n"
