"""Contract commitment, HR events, employer folds and history queries."""

import random

import pytest

from hirechain.errors import (
    BadSignature,
    ConsensusStalled,
    HirechainError,
    NotCurrentEmployer,
    ParseError,
    UnknownParticipant,
)
from hirechain.hrm import (
    CONTRACT_SECTIONS,
    EmploymentContract,
    HireDecision,
    HrEventKind,
    current_employer,
    export_history,
    make_contract,
    make_hr_event,
    parse_contract_file,
    query_history,
    record_hire,
    record_hr_event,
    verify_contract,
)
from hirechain.ledger import TxKind, decode_block, encode_block, encode_chain
from hirechain.recruit import ensure_applicant
from hirechain.registry import Signature

from .conftest import make_world


def _contract(world, employee_name="alice", employer_name="acme", extra=None):
    employee = ensure_applicant(employee_name, world.directory, world.keyring)
    employer = world.id_of(employer_name)
    sections = {
        "personal_info": {"name": employee_name},
        "previous_job_info": {"employer": "initech"},
        "company_info": {"name": employer_name},
        "company_terms": {"probation": "6m"},
        "employee_terms": dict(extra or {"salary": "70000"}),
    }
    return make_contract(sections, employee, employer, world.directory, world.keyring)


def _hire(world, employee_name="alice", **kwargs):
    contract = _contract(world, employee_name, **kwargs) if kwargs else _contract(world, employee_name)
    decision = HireDecision(contract.employer, contract.employee, 1)
    world.chain = record_hire(decision, contract, world.chain, world.engine)
    return contract


def test_one_hire_adds_one_block(world):
    initial = world.chain.height
    contract = _hire(world)
    assert world.chain.height == initial + 1
    tip = world.chain.tip
    assert tip.tx_count == 1
    assert tip.transactions[0].kind is TxKind.CONTRACT_RECORD
    assert tip.transactions[0].payload == contract


def test_five_hires_grow_height_by_five(world):
    initial = world.chain.height
    names = ["alice", "bob", "carol", "dave", "erin"]
    for name in names:
        _hire(world, name)
    assert world.chain.height == initial + 5
    committed = [
        tx.payload.employee
        for block in world.chain.blocks
        for tx in block.transactions
        if tx.kind is TxKind.CONTRACT_RECORD
    ]
    assert committed == [world.directory.by_name(n).id for n in names]


def test_hire_requires_matching_decision(world):
    contract = _contract(world)
    bogus = HireDecision(contract.employer, world.id_of("initech"), 1)
    with pytest.raises(HirechainError):
        record_hire(bogus, contract, world.chain, world.engine)


def test_hire_checks_ranked_list_membership(world):
    from fractions import Fraction
    from hirechain.recruit import RankedList

    contract = _contract(world)
    decision = HireDecision(contract.employer, contract.employee, 1)
    empty_list = RankedList((), ())
    with pytest.raises(HirechainError):
        record_hire(decision, contract, world.chain, world.engine, ranked=empty_list)
    listed = RankedList(((contract.employee, Fraction(3)),), ())
    world.chain = record_hire(decision, contract, world.chain, world.engine, ranked=listed)


def test_hire_rejects_bad_contract_signature(world):
    contract = _contract(world)
    import dataclasses

    tampered = dataclasses.replace(
        contract, employee_signature=Signature(1, b"\x00" * 64)
    )
    decision = HireDecision(tampered.employer, tampered.employee, 1)
    with pytest.raises(BadSignature):
        record_hire(decision, tampered, world.chain, world.engine)


def test_hire_rejects_unknown_parties(world):
    contract = _contract(world)
    import dataclasses

    ghost = dataclasses.replace(contract, employee=b"\x99" * 32)
    decision = HireDecision(ghost.employer, ghost.employee, 1)
    with pytest.raises(UnknownParticipant):
        record_hire(decision, ghost, world.chain, world.engine)


def test_hire_stalls_without_eligible_miners(world):
    for pid in world.miner_ids[3:]:
        world.engine.set_active(pid, False)
    _hire(world, "alice")
    _hire(world, "bob")
    _hire(world, "carol")
    with pytest.raises(ConsensusStalled):
        _hire(world, "dave")


# --- HR events ----------------------------------------------------------------------------

def test_hr_event_from_current_employer_commits(world):
    _hire(world)
    alice = world.directory.by_name("alice").id
    event = make_hr_event(
        alice, HrEventKind.PROMOTION, {"title": "senior"}, 5, world.id_of("acme"),
        world.directory, world.keyring,
    )
    world.chain = record_hr_event(event, world.chain, world.engine)
    assert world.chain.tip.transactions[0].payload == event


def test_hr_event_from_non_employer_is_rejected(world):
    _hire(world)
    alice = world.directory.by_name("alice").id
    event = make_hr_event(
        alice, HrEventKind.SALARY, {"amount": "1"}, 5, world.id_of("initech"),
        world.directory, world.keyring,
    )
    with pytest.raises(NotCurrentEmployer):
        record_hr_event(event, world.chain, world.engine)


def test_hr_event_before_any_contract_is_rejected(world):
    alice = ensure_applicant("alice", world.directory, world.keyring)
    event = make_hr_event(
        alice, HrEventKind.TRAINING, {"course": "sec"}, 5, world.id_of("acme"),
        world.directory, world.keyring,
    )
    with pytest.raises(NotCurrentEmployer):
        record_hr_event(event, world.chain, world.engine)


def test_termination_transfer_ends_employment(world):
    _hire(world)
    alice = world.directory.by_name("alice").id
    acme = world.id_of("acme")
    assert current_employer(world.chain, alice) == acme
    transfer = make_hr_event(
        alice, HrEventKind.TRANSFER, {"terminated": "true"}, 9, acme,
        world.directory, world.keyring,
    )
    world.chain = record_hr_event(transfer, world.chain, world.engine)
    assert current_employer(world.chain, alice) is None
    followup = make_hr_event(
        alice, HrEventKind.SALARY, {"amount": "0"}, 10, acme, world.directory, world.keyring
    )
    with pytest.raises(NotCurrentEmployer):
        record_hr_event(followup, world.chain, world.engine)


def test_rehire_after_termination(world):
    test_termination_transfer_ends_employment(world)
    _hire(world, "alice", employer_name="initech")
    alice = world.directory.by_name("alice").id
    assert current_employer(world.chain, alice) == world.id_of("initech")


# --- history ---------------------------------------------------------------------------------

def test_history_of_unknown_subject_is_empty(world):
    assert query_history(b"\x42" * 32, world.chain) == []


def test_history_counts_contract_and_events_in_commit_order(world):
    _hire(world)
    alice = world.directory.by_name("alice").id
    acme = world.id_of("acme")
    for kind, details in (
        (HrEventKind.TRAINING, {"course": "ml"}),
        (HrEventKind.SALARY, {"amount": "80000"}),
    ):
        event = make_hr_event(alice, kind, details, 5, acme, world.directory, world.keyring)
        world.chain = record_hr_event(event, world.chain, world.engine)
    entries = query_history(alice, world.chain)
    assert len(entries) == 3
    assert [e.tx.kind for e in entries] == [
        TxKind.CONTRACT_RECORD, TxKind.HR_EVENT_RECORD, TxKind.HR_EVENT_RECORD
    ]
    assert [e.height for e in entries] == sorted(e.height for e in entries)
    training = entries[1].tx.payload
    assert dict(training.details) == {"course": "ml"}


def test_history_is_a_pure_function_of_the_chain(world):
    _hire(world)
    alice = world.directory.by_name("alice").id
    first = export_history(query_history(alice, world.chain), world.directory)
    second = export_history(query_history(alice, world.chain), world.directory)
    assert first == second
    assert first.startswith("height,kind,subject,details_hash")


def test_contract_round_trips_through_chain_and_codec(world):
    contract = _hire(world)
    tip = world.chain.tip
    assert decode_block(encode_block(tip)) == tip
    retrieved = query_history(contract.employee, world.chain)[0].tx.payload
    assert retrieved == contract
    assert isinstance(retrieved, EmploymentContract)


def test_commits_never_rewrite_history(world):
    prefixes = [encode_chain(world.chain)]
    _hire(world)
    prefixes.append(encode_chain(world.chain))
    _hire(world, "bob")
    full = encode_chain(world.chain)
    for prefix in prefixes:
        assert full.startswith(prefix)


# --- contract files -------------------------------------------------------------------------

CONTRACT_FILE = """\
[personal_info]
name = alice
[previous_job_info]
employer = initech
[company_info]
name = acme
[company_terms]
probation = 6m
[employee_terms]
salary = 70000
"""


def test_parse_contract_file():
    sections = parse_contract_file(CONTRACT_FILE)
    assert set(sections) <= set(CONTRACT_SECTIONS)
    assert sections["personal_info"] == {"name": "alice"}
    with pytest.raises(ParseError, match="line 1"):
        parse_contract_file("[mystery_section]\n")
    with pytest.raises(ParseError, match="line 1"):
        parse_contract_file("stray = field\n")


def test_contract_verification_covers_all_five_sections(world):
    contract = _contract(world)
    verify_contract(contract, world.directory)
    import dataclasses

    for section in CONTRACT_SECTIONS:
        mutated = dataclasses.replace(contract, **{section: (("x", "y"),)})
        with pytest.raises(BadSignature):
            verify_contract(mutated, world.directory)
