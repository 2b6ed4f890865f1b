"""Employment contracts and follow-on HR events committed through consensus.

A hire appends one contract block; later salary, title, promotion, training,
leave, performance and transfer records reference the employee and must come
from the current employer as established by the chain itself.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping, Sequence

from ._wire import Reader, Writer, encode_record, read_record
from .errors import (
    BadSignature,
    BadTag,
    HirechainError,
    NotCurrentEmployer,
    ParseError,
    UnknownParticipant,
)
from .hashing import DIGEST_SIZE, double_hash
from .ledger import (
    Chain,
    Transaction,
    TxKind,
    iter_chain_txs,
    make_transaction,
    read_signature,
    register_payload_codec,
    write_signature,
)
from .recruit import ClaimAttestation, RankedList
from .registry import Directory, Keyring, Signature, sign_by_id, verify

#: Fixed order of the five contract sections on the wire.
CONTRACT_SECTIONS = (
    "personal_info",
    "previous_job_info",
    "company_info",
    "company_terms",
    "employee_terms",
)


class HrEventKind(enum.IntEnum):
    SALARY = 0
    TITLE = 1
    PROMOTION = 2
    TRAINING = 3
    LEAVE = 4
    PERFORMANCE = 5
    TRANSFER = 6

    @property
    def label(self) -> str:
        return _EVENT_LABELS[self]

    @classmethod
    def from_label(cls, label: str) -> "HrEventKind":
        try:
            return _EVENT_BY_LABEL[label]
        except KeyError:
            raise ValueError(f"unknown HR event kind {label!r}") from None


_EVENT_LABELS = {
    HrEventKind.SALARY: "Salary",
    HrEventKind.TITLE: "Title",
    HrEventKind.PROMOTION: "Promotion",
    HrEventKind.TRAINING: "Training",
    HrEventKind.LEAVE: "Leave",
    HrEventKind.PERFORMANCE: "Performance",
    HrEventKind.TRANSFER: "Transfer",
}
_EVENT_BY_LABEL = {label: kind for kind, label in _EVENT_LABELS.items()}


@dataclass(frozen=True, eq=True)
class EmploymentContract:
    personal_info: tuple[tuple[str, str], ...]
    previous_job_info: tuple[tuple[str, str], ...]
    company_info: tuple[tuple[str, str], ...]
    company_terms: tuple[tuple[str, str], ...]
    employee_terms: tuple[tuple[str, str], ...]
    employee: bytes
    employer: bytes
    employee_signature: Signature
    employer_signature: Signature

    def section(self, name: str) -> dict[str, str]:
        return dict(getattr(self, name))


def _freeze(fields: Mapping[str, str]) -> tuple[tuple[str, str], ...]:
    return tuple(sorted(fields.items()))


def contract_signing_digest(sections: Sequence[tuple[tuple[str, str], ...]]) -> bytes:
    """Both parties sign the concatenated canonical encodings of the five sections."""
    return double_hash(b"".join(encode_record(dict(section)) for section in sections))


def make_contract(
    sections: Mapping[str, Mapping[str, str]],
    employee: bytes,
    employer: bytes,
    directory: Directory,
    keyring: Keyring,
) -> EmploymentContract:
    frozen = tuple(_freeze(sections.get(name, {})) for name in CONTRACT_SECTIONS)
    digest = contract_signing_digest(frozen)
    return EmploymentContract(
        *frozen,
        employee=employee,
        employer=employer,
        employee_signature=sign_by_id(keyring, directory, employee, digest),
        employer_signature=sign_by_id(keyring, directory, employer, digest),
    )


def verify_contract(contract: EmploymentContract, directory: Directory) -> None:
    digest = contract_signing_digest(
        tuple(getattr(contract, name) for name in CONTRACT_SECTIONS)
    )
    for party, signature in (
        (contract.employee, contract.employee_signature),
        (contract.employer, contract.employer_signature),
    ):
        participant = directory.get(party)
        if participant is None:
            raise UnknownParticipant(party.hex())
        if not verify(participant.public_key, digest, signature):
            raise BadSignature(f"contract signature by {participant.name} does not verify")


def _encode_contract(payload: object) -> bytes:
    assert isinstance(payload, EmploymentContract)
    w = Writer()
    for name in CONTRACT_SECTIONS:
        w.raw(encode_record(dict(getattr(payload, name))))
    w.raw(payload.employee)
    w.raw(payload.employer)
    write_signature(w, payload.employee_signature)
    write_signature(w, payload.employer_signature)
    return w.getvalue()


def _decode_contract(data: bytes) -> EmploymentContract:
    r = Reader(data)
    sections = tuple(_freeze(read_record(r)) for _ in CONTRACT_SECTIONS)
    employee = r.take(DIGEST_SIZE)
    employer = r.take(DIGEST_SIZE)
    employee_signature = read_signature(r)
    employer_signature = read_signature(r)
    r.expect_end()
    return EmploymentContract(
        *sections,
        employee=employee,
        employer=employer,
        employee_signature=employee_signature,
        employer_signature=employer_signature,
    )


register_payload_codec(TxKind.CONTRACT_RECORD, _encode_contract, _decode_contract)


@dataclass(frozen=True)
class HrEventRecord:
    subject: bytes
    kind: HrEventKind
    details: tuple[tuple[str, str], ...]
    effective_tick: int
    issuer: bytes
    issuer_signature: Signature


def hr_event_digest(
    subject: bytes, kind: HrEventKind, details: tuple[tuple[str, str], ...], effective_tick: int
) -> bytes:
    w = Writer()
    w.raw(subject)
    w.u8(int(kind))
    w.raw(encode_record(dict(details)))
    w.u64(effective_tick)
    return double_hash(w.getvalue())


def make_hr_event(
    subject: bytes,
    kind: HrEventKind,
    details: Mapping[str, str],
    effective_tick: int,
    issuer: bytes,
    directory: Directory,
    keyring: Keyring,
) -> HrEventRecord:
    frozen = _freeze(details)
    digest = hr_event_digest(subject, kind, frozen, effective_tick)
    return HrEventRecord(
        subject, kind, frozen, effective_tick, issuer, sign_by_id(keyring, directory, issuer, digest)
    )


def verify_hr_event(event: HrEventRecord, directory: Directory) -> None:
    issuer = directory.get(event.issuer)
    if issuer is None:
        raise UnknownParticipant(event.issuer.hex())
    digest = hr_event_digest(event.subject, event.kind, event.details, event.effective_tick)
    if not verify(issuer.public_key, digest, event.issuer_signature):
        raise BadSignature(f"HR event signature by {issuer.name} does not verify")


def _encode_hr_event(payload: object) -> bytes:
    assert isinstance(payload, HrEventRecord)
    w = Writer()
    w.raw(payload.subject)
    w.u8(int(payload.kind))
    w.raw(encode_record(dict(payload.details)))
    w.u64(payload.effective_tick)
    w.raw(payload.issuer)
    write_signature(w, payload.issuer_signature)
    return w.getvalue()


def _decode_hr_event(data: bytes) -> HrEventRecord:
    r = Reader(data)
    subject = r.take(DIGEST_SIZE)
    kind_byte = r.u8()
    try:
        kind = HrEventKind(kind_byte)
    except ValueError:
        raise BadTag(f"unknown HR event kind {kind_byte}") from None
    details = _freeze(read_record(r))
    effective_tick = r.u64()
    issuer = r.take(DIGEST_SIZE)
    signature = read_signature(r)
    r.expect_end()
    return HrEventRecord(subject, kind, details, effective_tick, issuer, signature)


register_payload_codec(TxKind.HR_EVENT_RECORD, _encode_hr_event, _decode_hr_event)


@dataclass(frozen=True)
class HireDecision:
    company: bytes
    applicant: bytes
    source_rank: int


# --- chain queries and commit flows ----------------------------------------------------

def current_employer(chain: Chain, subject: bytes) -> bytes | None:
    """Fold the chain: the latest contract names the employer, a transfer
    event with terminated=true ends it."""
    employer: bytes | None = None
    for _, tx in iter_chain_txs(chain):
        if tx.kind is TxKind.CONTRACT_RECORD and tx.payload.employee == subject:
            employer = tx.payload.employer
        elif (
            tx.kind is TxKind.HR_EVENT_RECORD
            and tx.payload.subject == subject
            and tx.payload.kind is HrEventKind.TRANSFER
            and dict(tx.payload.details).get("terminated") == "true"
        ):
            employer = None
    return employer


def record_hire(
    decision: HireDecision,
    contract: EmploymentContract,
    chain: Chain,
    engine,
    *,
    ranked: RankedList | None = None,
    timestamp: int | None = None,
) -> Chain:
    """Commit one signed contract as a new block; one block per hire."""
    if decision.applicant != contract.employee or decision.company != contract.employer:
        raise HirechainError("hire decision does not match the contract parties")
    if ranked is not None and all(applicant != decision.applicant for applicant, _ in ranked.entries):
        raise HirechainError("applicant is not on the company's ranked list")
    engine.directory.require(contract.employee)
    engine.directory.require(contract.employer)
    verify_contract(contract, engine.directory)
    tx = make_transaction(
        TxKind.CONTRACT_RECORD,
        contract,
        contract.employer,
        engine.next_nonce(contract.employer, chain),
        engine.keyring,
        engine.directory,
    )
    return engine.commit(chain, [tx], timestamp=timestamp)


def record_hr_event(
    event: HrEventRecord,
    chain: Chain,
    engine,
    *,
    timestamp: int | None = None,
) -> Chain:
    engine.directory.require(event.subject)
    verify_hr_event(event, engine.directory)
    if current_employer(chain, event.subject) != event.issuer:
        raise NotCurrentEmployer(
            f"{engine.directory.display_name(event.issuer)} does not employ "
            f"{engine.directory.display_name(event.subject)}"
        )
    tx = make_transaction(
        TxKind.HR_EVENT_RECORD,
        event,
        event.issuer,
        engine.next_nonce(event.issuer, chain),
        engine.keyring,
        engine.directory,
    )
    return engine.commit(chain, [tx], timestamp=timestamp)


@dataclass(frozen=True)
class HistoryEntry:
    height: int
    tx: Transaction


def query_history(subject: bytes, chain: Chain) -> list[HistoryEntry]:
    """All committed contracts, HR events and attestations that reference the
    subject, in commit order."""
    out: list[HistoryEntry] = []
    for height, tx in iter_chain_txs(chain):
        payload = tx.payload
        if tx.kind is TxKind.CONTRACT_RECORD:
            if subject in (payload.employee, payload.employer):
                out.append(HistoryEntry(height, tx))
        elif tx.kind is TxKind.HR_EVENT_RECORD:
            if subject in (payload.subject, payload.issuer):
                out.append(HistoryEntry(height, tx))
        elif tx.kind is TxKind.CLAIM_ATTESTATION:
            if subject in (payload.subject, payload.attester):
                out.append(HistoryEntry(height, tx))
    return out


def _details_hash(tx: Transaction) -> bytes:
    payload = tx.payload
    if tx.kind is TxKind.CONTRACT_RECORD:
        return contract_signing_digest(
            tuple(getattr(payload, name) for name in CONTRACT_SECTIONS)
        )
    if tx.kind is TxKind.HR_EVENT_RECORD:
        return double_hash(encode_record(dict(payload.details)))
    assert isinstance(payload, ClaimAttestation)
    return payload.claim_ref


def _entry_subject(tx: Transaction) -> bytes:
    if tx.kind is TxKind.CONTRACT_RECORD:
        return tx.payload.employee
    return tx.payload.subject


def export_history(entries: Sequence[HistoryEntry], directory: Directory) -> str:
    lines = ["height,kind,subject,details_hash"]
    for entry in entries:
        lines.append(
            f"{entry.height},{entry.tx.kind.name},"
            f"{directory.display_name(_entry_subject(entry.tx))},{_details_hash(entry.tx).hex()}"
        )
    return "\n".join(lines) + "\n"


def parse_contract_file(text: str) -> dict[str, dict[str, str]]:
    """Read the five-section contract file: `[section]` headers, `key = value` lines."""
    sections: dict[str, dict[str, str]] = {}
    current: dict[str, str] | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in CONTRACT_SECTIONS:
                raise ParseError(f"line {lineno}: unknown contract section {name!r}")
            current = sections.setdefault(name, {})
            continue
        if current is None:
            raise ParseError(f"line {lineno}: field outside any [section]")
        key, sep, value = line.partition("=")
        if not sep:
            raise ParseError(f"line {lineno}: expected key = value")
        current[key.strip()] = value.strip()
    return sections
