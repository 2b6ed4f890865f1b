"""Operator command line: init node directories, run scenarios, rank
applicants, inspect chains.

Exit codes are a contract: 0 success, 1 usage or input error, 2 consensus
stall.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .errors import (
    AlreadyInitialized,
    HeightOutOfRange,
    HirechainError,
    NoSuchNode,
)
from .hashing import double_hash
from .hrm import CONTRACT_SECTIONS
from .ledger import (
    Chain,
    TxKind,
    block_id,
    build_genesis,
    encode_chain,
    load_chain_file,
)
from .recruit import (
    ClaimKind,
    parse_applicants_file,
    parse_fields,
    parse_records_file,
    parse_requirements_file,
)
from .registry import (
    Directory,
    Keyring,
    Role,
    build_directory,
    derive_public_key,
    parse_roster,
    participant_id,
)
from .simnet import (
    Require,
    RunRanking,
    Scenario,
    SeedRecord,
    SubmitClaim,
    load_scenario,
    run as run_scenario,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_STALL = 2

ROSTER_FILE = "roster.csv"


def _nodes_dir(data_dir: Path) -> Path:
    return data_dir / "nodes"


def _write_chain(data_dir: Path, name: str, chain: Chain) -> None:
    """Persist a node's chain, refusing to rewrite committed history."""
    path = _nodes_dir(data_dir) / name / "chain.dat"
    encoded = encode_chain(chain)
    if path.exists():
        existing = path.read_bytes()
        if not encoded.startswith(existing):
            raise HirechainError(
                f"{path} holds a different history; refusing to overwrite"
            )
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encoded)


def cmd_init(data_dir: Path, roster_path: Path) -> int:
    if (data_dir / ROSTER_FILE).exists():
        raise AlreadyInitialized(f"{data_dir} already holds a roster")
    roster_text = roster_path.read_text()
    entries = parse_roster(roster_text)
    directory, keyring = build_directory(entries)
    miner_ids = [directory.by_name(entry.name).id for entry in entries]
    genesis = build_genesis(directory, keyring, miner_ids)
    chain = Chain((genesis,))
    data_dir.mkdir(parents=True, exist_ok=True)
    for entry in entries:
        node_dir = _nodes_dir(data_dir) / entry.name
        node_dir.mkdir(parents=True, exist_ok=True)
        (node_dir / "key.hex").write_text(entry.secret_seed.hex() + "\n")
        (node_dir / "role.txt").write_text(entry.role.label + "\n")
        _write_chain(data_dir, entry.name, chain)
    (data_dir / ROSTER_FILE).write_text(roster_text)
    digest = block_id(genesis).hex()
    for entry in entries:
        print(f"{entry.name},{digest}")
    return EXIT_OK


def cmd_run(data_dir: Path, scenario_path: Path, seed: int | None, fmt: str) -> int:
    scenario = load_scenario(scenario_path)
    if seed is not None:
        scenario = replace(scenario, seed=seed)
    report = run_scenario(scenario)
    data_dir.mkdir(parents=True, exist_ok=True)
    for name, chain in report.chains:
        _write_chain(data_dir, name, chain)
    (data_dir / "report.csv").write_text(report.to_text())
    if fmt == "text":
        print(f"final height: {report.final_height}")
        print(f"stalled: {'yes' if report.stalled else 'no'}")
        print()
    print(report.to_text(), end="")
    return EXIT_STALL if report.stalled else EXIT_OK


def _rank_scenario(data_dir: Path, applicants_path: Path, requirements_path: Path) -> Scenario:
    roster_file = data_dir / ROSTER_FILE
    if not roster_file.exists():
        raise HirechainError(f"{data_dir} is not initialized (run `hirechain init` first)")
    roster = parse_roster(roster_file.read_text())
    directory, keyring = build_directory(roster)
    companies = directory.with_role(Role.RECRUITING_COMPANY)
    if not companies:
        raise HirechainError("roster has no RecruitingCompany participant")
    company = companies[0].name

    applicants_text = applicants_path.read_text()
    requirements_text = requirements_path.read_text()
    # dry parses for early line-numbered diagnostics
    parse_applicants_file(applicants_text, directory, keyring)
    spec = parse_requirements_file(requirements_text, companies[0].id)

    script: list = []
    for entry in roster:
        records_path = _nodes_dir(data_dir) / entry.name / "records.txt"
        if not records_path.exists():
            continue
        for subject, kind, fields in parse_records_file(records_path.read_text()):
            script.append(
                SeedRecord(0, entry.name, subject, kind, tuple(sorted(fields.items())))
            )
    for item in spec.items:
        script.append(Require(0, company, item))
    for lineno, raw in enumerate(applicants_text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        applicant, kind_label, issuer, field_text = (p.strip() for p in line.split(",", 3))
        script.append(
            SubmitClaim(
                0,
                applicant,
                ClaimKind.from_label(kind_label),
                issuer,
                tuple(sorted(parse_fields(field_text).items())),
            )
        )
    script.append(RunRanking(0, company))
    return Scenario(roster=tuple(roster), miners=tuple(e.name for e in roster), script=tuple(script))


def cmd_rank(data_dir: Path, applicants_path: Path, requirements_path: Path, fmt: str) -> int:
    scenario = _rank_scenario(data_dir, applicants_path, requirements_path)
    report = run_scenario(scenario)
    if report.stalled:
        print("consensus stalled while notarizing attestations", file=sys.stderr)
        return EXIT_STALL
    for name, chain in report.chains:
        _write_chain(data_dir, name, chain)
    company, rendered = report.ranked[0]
    if fmt == "text":
        print(f"ranked list for {company}:")
    print(rendered, end="")
    return EXIT_OK


def _load_names(data_dir: Path) -> dict[bytes, str]:
    names: dict[bytes, str] = {}
    nodes = _nodes_dir(data_dir)
    if not nodes.is_dir():
        return names
    for node_dir in sorted(nodes.iterdir()):
        key_file = node_dir / "key.hex"
        if key_file.is_file():
            seed = bytes.fromhex(key_file.read_text().strip())
            names[participant_id(derive_public_key(seed))] = node_dir.name
    return names


def _describe_tx(tx, names: dict[bytes, str]) -> str:
    def name_of(pid: bytes) -> str:
        return names.get(pid, pid.hex()[:12])

    payload = tx.payload
    if tx.kind is TxKind.PERMISSION_GRANT:
        parts = ", ".join(f"{name_of(s)}:{int(r)}" for s, r in payload.grants)
        return f"grants {parts}"
    if tx.kind is TxKind.CLAIM_ATTESTATION:
        return (
            f"{payload.claim_kind.label} of {name_of(payload.subject)} "
            f"-> {payload.verdict.name.lower()} by {name_of(payload.attester)}"
        )
    if tx.kind is TxKind.CONTRACT_RECORD:
        return f"contract {name_of(payload.employee)} @ {name_of(payload.employer)}"
    return (
        f"{payload.kind.label} for {name_of(payload.subject)} "
        f"by {name_of(payload.issuer)} (tick {payload.effective_tick})"
    )


def cmd_inspect(data_dir: Path, node: str, height: int | None) -> int:
    chain_path = _nodes_dir(data_dir) / node / "chain.dat"
    if not chain_path.is_file():
        raise NoSuchNode(f"no chain found for node {node!r} under {data_dir}")
    chain = load_chain_file(chain_path)
    names = _load_names(data_dir)
    if height is not None:
        if not 0 <= height <= chain.height:
            raise HeightOutOfRange(f"height {height} beyond tip {chain.height}")
        block = chain.blocks[height]
        print(f"height      {block.header.height}")
        print(f"block_id    {block_id(block).hex()}")
        print(f"prev_hash   {block.header.prev_hash.hex()}")
        print(f"merkle_root {block.header.merkle_root.hex()}")
        print(f"timestamp   {block.header.timestamp}")
        print(f"miner       {names.get(block.header.miner, block.header.miner.hex())}")
        print(f"tx_count    {block.tx_count}")
        for index, tx in enumerate(block.transactions):
            author = names.get(tx.author, tx.author.hex()[:12])
            print(f"tx[{index}] {tx.kind.name} nonce={tx.nonce} author={author}")
            print(f"      {_describe_tx(tx, names)}")
        return EXIT_OK
    print("height,block_id,miner,timestamp,tx_kinds")
    for block in chain.blocks:
        kinds = "+".join(tx.kind.name for tx in block.transactions)
        miner = names.get(block.header.miner, block.header.miner.hex()[:12])
        print(f"{block.header.height},{block_id(block).hex()},{miner},{block.header.timestamp},{kinds}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hirechain",
        description="Permissioned hiring/HR ledger simulator",
    )
    parser.add_argument("--data-dir", type=Path, default=Path("hirechain-data"))
    parser.add_argument("--format", choices=("text", "csv"), default="text")
    parser.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    sub = parser.add_subparsers(dest="command", required=True)

    p_init = sub.add_parser("init", help="create node directories from a roster file")
    p_init.add_argument("--roster", type=Path, required=True)

    p_run = sub.add_parser("run", help="run a scenario file")
    p_run.add_argument("--scenario", type=Path, required=True)

    p_rank = sub.add_parser("rank", help="verify and rank an applicants file")
    p_rank.add_argument("--applicants", type=Path, required=True)
    p_rank.add_argument("--requirements", type=Path, required=True)

    p_inspect = sub.add_parser("inspect", help="dump a node's chain")
    p_inspect.add_argument("--node", required=True)
    p_inspect.add_argument("--height", type=int, default=None)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "init":
            return cmd_init(args.data_dir, args.roster)
        if args.command == "run":
            return cmd_run(args.data_dir, args.scenario, args.seed, args.format)
        if args.command == "rank":
            return cmd_rank(args.data_dir, args.applicants, args.requirements, args.format)
        return cmd_inspect(args.data_dir, args.node, args.height)
    except HirechainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
