"""Shared builders: a fixed five-role deployment and random scenarios."""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

import pytest

from hirechain.consensus import ConsensusEngine, DiversityRule, MinerSet
from hirechain.ledger import Chain, apply_block_grants, build_genesis
from hirechain.registry import (
    Directory,
    Keyring,
    PermissionGrant,
    Right,
    Role,
    RosterEntry,
    build_directory,
)
from hirechain.simnet import (
    Grant,
    Hire,
    HrEvent,
    InactivityWindow,
    Require,
    RunRanking,
    Scenario,
    SeedRecord,
    SubmitClaim,
)
from hirechain.hrm import HrEventKind
from hirechain.recruit import ClaimKind, RequirementItem, parse_predicate

FIVE_ROLES = (
    (Role.RECRUITING_COMPANY, "acme"),
    (Role.EMPLOYER, "initech"),
    (Role.APPLICANT, "applicants"),
    (Role.HEALTH_AUTHORITY, "medboard"),
    (Role.LAW_AGENCY, "courts"),
)

#: rights each role already holds from genesis, used for harmless filler grants
GENESIS_RIGHTS = {
    "acme": Right.CONNECT | Right.SEND | Right.MINE,
    "initech": Right.CONNECT | Right.SEND | Right.MINE | Right.ATTEST,
    "applicants": Right.CONNECT | Right.SEND | Right.MINE,
    "medboard": Right.CONNECT | Right.SEND | Right.MINE | Right.ATTEST,
    "courts": Right.CONNECT | Right.SEND | Right.MINE | Right.ATTEST,
}


def five_role_roster() -> tuple[RosterEntry, ...]:
    return tuple(
        RosterEntry(role, name, bytes([index + 1]) * 32)
        for index, (role, name) in enumerate(FIVE_ROLES)
    )


@dataclass
class World:
    directory: Directory
    keyring: Keyring
    miner_ids: tuple[bytes, ...]
    chain: Chain
    rule: DiversityRule
    engine: ConsensusEngine

    def id_of(self, name: str) -> bytes:
        return self.directory.by_name(name).id

    def miner_set(self, inactive: tuple[bytes, ...] = ()) -> MinerSet:
        return MinerSet.of(self.miner_ids, inactive=inactive)

    def filler_grant_payload(self, subject_name: str) -> PermissionGrant:
        return PermissionGrant(((self.id_of(subject_name), GENESIS_RIGHTS[subject_name]),))


def make_world(diversity: Fraction = Fraction(3, 4)) -> World:
    roster = five_role_roster()
    directory, keyring = build_directory(roster)
    miner_ids = tuple(directory.by_name(name).id for _, name in FIVE_ROLES)
    genesis = build_genesis(directory, keyring, miner_ids)
    apply_block_grants(directory, genesis, bootstrap=True)
    rule = DiversityRule(diversity)
    engine = ConsensusEngine(directory, keyring, miner_ids, rule)
    return World(directory, keyring, miner_ids, Chain((genesis,)), rule, engine)


@pytest.fixture
def world() -> World:
    return make_world()


# --- scripted scenarios -------------------------------------------------------------

def pipeline_script(start: int = 1, carol_lies: bool = True) -> list:
    """The recruiting flow: seed records, stage claims, rank, hire, HR events."""
    t = start
    carol_degree = "PhD" if carol_lies else "MSc"
    return [
        SeedRecord(t, "initech", "alice", ClaimKind.EMPLOYMENT,
                   (("title", "engineer"), ("years", "3"))),
        SeedRecord(t, "medboard", "alice", ClaimKind.HEALTH_RECORD, (("status", "fit"),)),
        SeedRecord(t, "initech", "bob", ClaimKind.EDUCATION, (("degree", "BSc"),)),
        SeedRecord(t, "courts", "bob", ClaimKind.CRIMINAL_RECORD,
                   (("adverse", "true"), ("case", "fraud"))),
        SeedRecord(t, "initech", "carol", ClaimKind.EDUCATION, (("degree", "MSc"),)),
        Require(t + 1, "acme", RequirementItem(
            ClaimKind.EMPLOYMENT, parse_predicate("years>=2"), Fraction(2), False)),
        Require(t + 1, "acme", RequirementItem(
            ClaimKind.HEALTH_RECORD, parse_predicate("status=fit"), Fraction(1), False)),
        SubmitClaim(t + 2, "alice", ClaimKind.EMPLOYMENT, "initech",
                    (("title", "engineer"), ("years", "3"))),
        SubmitClaim(t + 2, "alice", ClaimKind.HEALTH_RECORD, "medboard", (("status", "fit"),)),
        SubmitClaim(t + 2, "bob", ClaimKind.EDUCATION, "initech", (("degree", "BSc"),)),
        SubmitClaim(t + 2, "bob", ClaimKind.CRIMINAL_RECORD, "courts",
                    (("adverse", "true"), ("case", "fraud"))),
        SubmitClaim(t + 2, "carol", ClaimKind.EDUCATION, "initech",
                    (("degree", carol_degree),)),
        RunRanking(t + 4, "acme"),
        Hire(t + 40, "acme", "alice"),
        HrEvent(t + 60, "acme", "alice", HrEventKind.PROMOTION, (("title", "senior"),)),
        HrEvent(t + 70, "acme", "alice", HrEventKind.SALARY, (("amount", "90000"),)),
    ]


def grant_burst(count: int, start: int = 1, step: int = 1) -> list[Grant]:
    targets = ["initech", "applicants", "medboard", "courts"]
    return [
        Grant(start + i * step, "acme", targets[i % len(targets)],
              GENESIS_RIGHTS[targets[i % len(targets)]])
        for i in range(count)
    ]


def base_scenario(script, *, seed: int = 0, inactivity=(), tick_limit: int = 10_000,
                  latency: int = 0, batch: bool = False) -> Scenario:
    return Scenario(
        roster=five_role_roster(),
        miners=tuple(name for _, name in FIVE_ROLES),
        diversity=Fraction(3, 4),
        seed=seed,
        latency=latency,
        tick_limit=tick_limit,
        batch=batch,
        inactivity=tuple(inactivity),
        script=tuple(script),
    )


# --- random ledger content ------------------------------------------------------------

def random_payload(world: World, rng: random.Random):
    """A syntactically valid payload of a random kind for codec-level tests."""
    from hirechain.ledger import TxKind
    from hirechain.recruit import ClaimAttestation, Verdict
    from hirechain.hrm import EmploymentContract, HrEventRecord
    from hirechain.registry import Signature

    def rand_bytes(n: int) -> bytes:
        return bytes(rng.randrange(256) for _ in range(n))

    def rand_record() -> tuple[tuple[str, str], ...]:
        return tuple(
            sorted({f"k{rng.randrange(8)}": str(rng.randrange(1000)) for _ in range(rng.randrange(4))}.items())
        )

    kind = rng.choice(list(TxKind))
    if kind is TxKind.PERMISSION_GRANT:
        name = rng.choice(list(GENESIS_RIGHTS))
        return kind, world.filler_grant_payload(name)
    if kind is TxKind.CLAIM_ATTESTATION:
        return kind, ClaimAttestation(
            rand_bytes(32),
            rng.choice(list(ClaimKind)),
            rand_bytes(32),
            rng.choice(list(Verdict)),
            world.id_of("initech"),
            Signature(1, rand_bytes(64)),
        )
    if kind is TxKind.CONTRACT_RECORD:
        return kind, EmploymentContract(
            rand_record(), rand_record(), rand_record(), rand_record(), rand_record(),
            employee=rand_bytes(32),
            employer=world.id_of("initech"),
            employee_signature=Signature(1, rand_bytes(64)),
            employer_signature=Signature(1, rand_bytes(64)),
        )
    return kind, HrEventRecord(
        rand_bytes(32),
        rng.choice(list(HrEventKind)),
        rand_record(),
        rng.randrange(10_000),
        world.id_of("initech"),
        Signature(1, rand_bytes(64)),
    )


def random_transactions(world: World, rng: random.Random, count: int):
    from hirechain.ledger import make_transaction

    txs = []
    for _ in range(count):
        kind, payload = random_payload(world, rng)
        author_name = rng.choice([name for _, name in FIVE_ROLES])
        author = world.id_of(author_name)
        txs.append(
            make_transaction(
                kind, payload, author, world.engine.next_nonce(author, world.chain),
                world.keyring, world.directory,
            )
        )
    return txs


def grow_random_chain(world: World, rng: random.Random, blocks: int) -> None:
    """Extend world.chain with honestly committed blocks of 1..3 random txs."""
    for _ in range(blocks):
        txs = random_transactions(world, rng, rng.randint(1, 3))
        world.chain = world.engine.commit(world.chain, txs)


def random_scenario(seed: int) -> Scenario:
    """Seeded mix of filler grants, an optional recruiting flow and downtime."""
    rng = random.Random(seed)
    script: list = []
    if seed % 3 == 0:
        script.extend(pipeline_script(start=rng.randint(1, 4), carol_lies=rng.random() < 0.5))
        tick = 90
    else:
        tick = rng.randint(1, 5)
    targets = ["initech", "applicants", "medboard", "courts"]
    for _ in range(rng.randint(12, 26)):
        target = rng.choice(targets)
        script.append(Grant(tick, "acme", target, GENESIS_RIGHTS[target]))
        tick += rng.randint(0, 5)
    inactivity = []
    if rng.random() < 0.5:
        name = rng.choice([name for _, name in FIVE_ROLES])
        start = rng.randint(5, 80)
        inactivity.append(InactivityWindow(name, start, start + rng.randint(10, 40)))
    return base_scenario(script, seed=seed, inactivity=inactivity)
