"""Builder for the frozen golden fixtures.

The recipe is fully deterministic (fixed roster seeds, fixed timestamps,
deterministic signatures), so re-running it must reproduce the committed
fixture files byte for byte. Regenerate with `python3 -m tests.golden` after
an intentional wire-format change.
"""

from __future__ import annotations

from pathlib import Path

from hirechain.hrm import HrEventKind, make_contract, make_hr_event
from hirechain.ledger import Chain, TxKind, encode_block, encode_chain, make_transaction
from hirechain.recruit import ensure_applicant

from .conftest import make_world

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def build_golden_chain() -> Chain:
    world = make_world()
    alice = ensure_applicant("alice", world.directory, world.keyring)
    acme = world.id_of("acme")
    initech = world.id_of("initech")

    def tx(kind, payload, author):
        return make_transaction(
            kind, payload, author, world.engine.next_nonce(author, world.chain),
            world.keyring, world.directory,
        )

    grant = tx(TxKind.PERMISSION_GRANT, world.filler_grant_payload("initech"), acme)
    world.chain = world.engine.commit(world.chain, [grant], timestamp=10)

    contract = make_contract(
        {
            "personal_info": {"name": "alice"},
            "previous_job_info": {"employer": "initech", "title": "engineer"},
            "company_info": {"name": "acme"},
            "company_terms": {"probation": "6m"},
            "employee_terms": {"salary": "80000"},
        },
        alice,
        acme,
        world.directory,
        world.keyring,
    )
    world.chain = world.engine.commit(
        world.chain, [tx(TxKind.CONTRACT_RECORD, contract, acme)], timestamp=20
    )

    event = make_hr_event(
        alice, HrEventKind.PROMOTION, {"title": "senior"}, 30, acme,
        world.directory, world.keyring,
    )
    second_grant = tx(TxKind.PERMISSION_GRANT, world.filler_grant_payload("medboard"), acme)
    world.chain = world.engine.commit(
        world.chain,
        [tx(TxKind.HR_EVENT_RECORD, event, acme), second_grant],
        timestamp=30,
    )
    return world.chain


def write_fixtures() -> None:
    chain = build_golden_chain()
    FIXTURES.mkdir(exist_ok=True)
    (FIXTURES / "golden_block.bin").write_bytes(encode_block(chain.blocks[2]))
    (FIXTURES / "golden_chain.bin").write_bytes(encode_chain(chain))
    print(f"wrote fixtures for a {chain.height + 1}-block chain under {FIXTURES}")


if __name__ == "__main__":
    write_fixtures()
