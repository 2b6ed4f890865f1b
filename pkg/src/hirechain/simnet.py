"""Deterministic discrete-event simulation of the multi-node deployment.

One node per roster participant. A submitted transaction is announced,
gossiped into every mempool, put into a block by the round-robin proposer,
checked by the single designated validator and finally delivered to all
nodes, one protocol step per tick:

    announce @ t  ->  validate @ t+1  ->  commit @ t+2  ->  appended @ t+3

Link latency shifts the gossip and block deliveries; everything else is a
pure function of the scenario, so identical scenarios give byte-identical
reports and chain files.
"""

from __future__ import annotations

import enum
import heapq
import random
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Mapping

from .consensus import (
    DiversityRule,
    MinerSet,
    Rejection,
    approve_block,
    designated_proposer,
    designated_validator,
    eligible_miners,
)
from .errors import (
    HirechainError,
    MalformedScenario,
    NotCurrentEmployer,
    ParseError,
    TxNotCommitted,
    UnknownMiner,
)
from .hashing import double_hash
from .hrm import (
    HrEventKind,
    current_employer,
    make_contract,
    make_hr_event,
    parse_contract_file,
    verify_contract,
    verify_hr_event,
)
from .ledger import (
    Block,
    Chain,
    Transaction,
    TxKind,
    apply_block_grants,
    block_id,
    build_block,
    build_genesis,
    encode_chain,
    make_transaction,
    sign_block,
    tx_id,
)
from .recruit import (
    AuthorityStore,
    ApplicantProfile,
    Claim,
    ClaimKind,
    RankedList,
    RequirementItem,
    RequirementSpec,
    ensure_applicant,
    evaluate_applicants,
    export_ranked_list,
    make_claim,
    parse_fields,
    parse_predicate,
)
from .registry import (
    PermissionGrant,
    Right,
    Role,
    RosterEntry,
    build_directory,
    parse_roster,
    rights_from_names,
)

DEFAULT_TICK_LIMIT = 10_000
DEFAULT_DIVERSITY = Fraction(3, 4)


class EventKind(enum.Enum):
    ANNOUNCE = "Announce"
    VALIDATE = "Validate"
    COMMIT = "Commit"
    DELIVER = "Deliver"
    MINER_DOWN = "MinerDown"
    MINER_UP = "MinerUp"
    CLIENT_ACTION = "ClientAction"


@dataclass(frozen=True)
class SimEvent:
    tick: int
    kind: EventKind
    payload: object


# --- scripted client actions -----------------------------------------------------

@dataclass(frozen=True)
class SeedRecord:
    tick: int
    authority: str
    subject: str
    kind: ClaimKind
    fields: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class Require:
    tick: int
    company: str
    item: RequirementItem


@dataclass(frozen=True)
class SubmitClaim:
    tick: int
    applicant: str
    kind: ClaimKind
    issuer: str
    fields: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class RunRanking:
    tick: int
    company: str


@dataclass(frozen=True)
class Hire:
    tick: int
    company: str
    applicant: str
    sections: tuple[tuple[str, tuple[tuple[str, str], ...]], ...] = ()


@dataclass(frozen=True)
class HrEvent:
    tick: int
    issuer: str
    subject: str
    kind: HrEventKind
    fields: tuple[tuple[str, str], ...]
    effective_tick: int | None = None


@dataclass(frozen=True)
class Grant:
    tick: int
    grantor: str
    subject: str
    rights: Right


ScriptAction = SeedRecord | Require | SubmitClaim | RunRanking | Hire | HrEvent | Grant


@dataclass(frozen=True)
class InactivityWindow:
    miner: str
    start: int
    end: int | None  # inclusive; None keeps the miner down for good


@dataclass(frozen=True)
class Scenario:
    roster: tuple[RosterEntry, ...]
    miners: tuple[str, ...]
    diversity: Fraction = DEFAULT_DIVERSITY
    seed: int = 0
    latency: int = 0
    tick_limit: int = DEFAULT_TICK_LIMIT
    batch: bool = False
    loss: float = 0.0
    jitter: int = 0
    inactivity: tuple[InactivityWindow, ...] = ()
    script: tuple[ScriptAction, ...] = ()


def inject_inactivity(
    scenario: Scenario, miner: str, from_tick: int, to_tick: int | None = None
) -> Scenario:
    """Return the scenario with one more downtime window for a miner."""
    if miner not in scenario.miners:
        raise UnknownMiner(f"{miner!r} is not a configured miner")
    window = InactivityWindow(miner, from_tick, to_tick)
    return replace(scenario, inactivity=scenario.inactivity + (window,))


# --- scenario files ------------------------------------------------------------------

def parse_scenario(text: str, base_dir: Path | None = None) -> Scenario:
    """Parse the sectioned scenario grammar ([roster] [consensus] [network] [script])."""
    sections: dict[str, list[tuple[int, str]]] = {}
    current: list[tuple[int, str]] | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().lower()
            if name not in ("roster", "consensus", "network", "script"):
                raise MalformedScenario(f"line {lineno}: unknown section [{name}]")
            current = sections.setdefault(name, [])
            continue
        if current is None:
            raise MalformedScenario(f"line {lineno}: content before any section header")
        current.append((lineno, line))

    if "roster" not in sections:
        raise MalformedScenario("scenario has no [roster] section")
    try:
        roster = tuple(parse_roster("\n".join(line for _, line in sections["roster"])))
    except HirechainError as exc:
        raise MalformedScenario(f"[roster]: {exc}") from exc
    names = [entry.name for entry in roster]

    miners: tuple[str, ...] = tuple(names)
    diversity = DEFAULT_DIVERSITY
    inactivity: list[InactivityWindow] = []
    for lineno, line in sections.get("consensus", []):
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep:
            raise MalformedScenario(f"line {lineno}: expected key = value")
        if key == "diversity":
            try:
                diversity = Fraction(value)
            except (ValueError, ZeroDivisionError):
                raise MalformedScenario(f"line {lineno}: bad diversity {value!r}") from None
            if not 0 <= diversity <= 1:
                raise MalformedScenario(f"line {lineno}: diversity must lie in [0, 1]")
        elif key == "miners":
            miners = tuple(name.strip() for name in value.split(",") if name.strip())
        elif key == "inactive":
            for spec in value.split(","):
                inactivity.append(_parse_inactivity(spec.strip(), lineno))
        else:
            raise MalformedScenario(f"line {lineno}: unknown consensus key {key!r}")

    seed, latency, tick_limit, batch = 0, 0, DEFAULT_TICK_LIMIT, False
    loss, jitter = 0.0, 0
    for lineno, line in sections.get("network", []):
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep:
            raise MalformedScenario(f"line {lineno}: expected key = value")
        try:
            if key == "seed":
                seed = int(value)
            elif key == "latency":
                latency = int(value)
            elif key == "tick_limit":
                tick_limit = int(value)
            elif key == "batch":
                batch = _parse_flag(value)
            elif key == "loss":
                loss = float(value)
            elif key == "jitter":
                jitter = int(value)
            else:
                raise MalformedScenario(f"line {lineno}: unknown network key {key!r}")
        except ValueError:
            raise MalformedScenario(f"line {lineno}: bad value for {key!r}") from None

    script: list[ScriptAction] = []
    for lineno, line in sections.get("script", []):
        script.append(_parse_action(line, lineno, base_dir))

    scenario = Scenario(
        roster=roster,
        miners=miners,
        diversity=diversity,
        seed=seed,
        latency=latency,
        tick_limit=tick_limit,
        batch=batch,
        loss=loss,
        jitter=jitter,
        inactivity=tuple(inactivity),
        script=tuple(script),
    )
    _check_scenario(scenario)
    return scenario


def load_scenario(path: Path) -> Scenario:
    return parse_scenario(path.read_text(), base_dir=path.parent)


def _parse_flag(value: str) -> bool:
    lowered = value.lower()
    if lowered in ("on", "true", "yes", "1"):
        return True
    if lowered in ("off", "false", "no", "0"):
        return False
    raise ValueError(value)


def _parse_inactivity(spec: str, lineno: int) -> InactivityWindow:
    name, sep, window = spec.partition(":")
    if not sep or ".." not in window:
        raise MalformedScenario(f"line {lineno}: expected name:start..end, got {spec!r}")
    start_text, _, end_text = window.partition("..")
    try:
        start = int(start_text)
        end = int(end_text) if end_text else None
    except ValueError:
        raise MalformedScenario(f"line {lineno}: bad inactivity window {window!r}") from None
    return InactivityWindow(name.strip(), start, end)


def _parse_action(line: str, lineno: int, base_dir: Path | None) -> ScriptAction:
    parts = line.split()
    if len(parts) < 2:
        raise MalformedScenario(f"line {lineno}: expected `tick verb ...`")
    try:
        tick = int(parts[0])
    except ValueError:
        raise MalformedScenario(f"line {lineno}: bad tick {parts[0]!r}") from None
    verb, args = parts[1], parts[2:]
    try:
        if verb == "record" and len(args) == 4:
            return SeedRecord(
                tick, args[0], args[1], ClaimKind.from_label(args[2]),
                tuple(sorted(parse_fields(args[3]).items())),
            )
        if verb == "require" and len(args) == 5:
            item = RequirementItem(
                ClaimKind.from_label(args[1]),
                parse_predicate(args[2]),
                Fraction(args[3]),
                _parse_flag(args[4]),
            )
            return Require(tick, args[0], item)
        if verb == "apply" and len(args) == 4:
            return SubmitClaim(
                tick, args[0], ClaimKind.from_label(args[1]), args[2],
                tuple(sorted(parse_fields(args[3]).items())),
            )
        if verb == "rank" and len(args) == 1:
            return RunRanking(tick, args[0])
        if verb == "hire" and len(args) in (2, 3):
            sections: tuple[tuple[str, tuple[tuple[str, str], ...]], ...] = ()
            if len(args) == 3:
                if not args[2].startswith("@"):
                    raise MalformedScenario(
                        f"line {lineno}: third hire argument must be @contract-file"
                    )
                if base_dir is None:
                    raise MalformedScenario(f"line {lineno}: contract files need a scenario path")
                parsed = parse_contract_file((base_dir / args[2][1:]).read_text())
                sections = tuple(
                    (name, tuple(sorted(fields.items()))) for name, fields in sorted(parsed.items())
                )
            return Hire(tick, args[0], args[1], sections)
        if verb == "event" and len(args) in (4, 5):
            effective = int(args[4]) if len(args) == 5 else None
            return HrEvent(
                tick, args[0], args[1], HrEventKind.from_label(args[2]),
                tuple(sorted(parse_fields(args[3]).items())), effective,
            )
        if verb == "grant" and len(args) == 3:
            rights = Right(0) if args[2].lower() == "none" else rights_from_names(args[2].split(","))
            return Grant(tick, args[0], args[1], rights)
    except (ValueError, ZeroDivisionError, ParseError) as exc:
        raise MalformedScenario(f"line {lineno}: {exc}") from None
    except OSError as exc:
        raise MalformedScenario(f"line {lineno}: cannot read contract file: {exc}") from None
    raise MalformedScenario(f"line {lineno}: unknown or malformed action {verb!r}")


def _check_scenario(scenario: Scenario) -> None:
    if not scenario.roster:
        raise MalformedScenario("roster is empty")
    names = {entry.name for entry in scenario.roster}
    if not scenario.miners:
        raise MalformedScenario("at least one miner is required")
    for miner in scenario.miners:
        if miner not in names:
            raise MalformedScenario(f"miner {miner!r} is not in the roster")
    if len(set(scenario.miners)) != len(scenario.miners):
        raise MalformedScenario("duplicate miner names")
    if scenario.latency < 0 or scenario.jitter < 0:
        raise MalformedScenario("latency and jitter must be non-negative")
    if not 0.0 <= scenario.loss < 1.0:
        raise MalformedScenario("loss must lie in [0, 1)")
    if scenario.tick_limit < 1:
        raise MalformedScenario("tick_limit must be positive")
    for window in scenario.inactivity:
        if window.miner not in names:
            raise MalformedScenario(f"inactive miner {window.miner!r} is not in the roster")
        if window.start < 0 or (window.end is not None and window.end < window.start):
            raise MalformedScenario(f"bad inactivity window for {window.miner!r}")
    for action in scenario.script:
        if action.tick < 0 or action.tick > scenario.tick_limit:
            raise MalformedScenario(f"action tick {action.tick} outside [0, tick_limit]")


# --- reports ------------------------------------------------------------------------------

@dataclass(frozen=True)
class TxReport:
    tx_id: bytes
    kind: TxKind
    announce_tick: int
    commit_tick: int | None


@dataclass(frozen=True)
class SimReport:
    node_digests: tuple[tuple[str, bytes], ...]
    final_height: int
    txs: tuple[TxReport, ...]
    stalls: tuple[tuple[int, int | None], ...]
    rejected_blocks: int
    stalled: bool
    ranked: tuple[tuple[str, str], ...]
    chains: tuple[tuple[str, Chain], ...]

    def to_text(self) -> str:
        lines = ["tx_id,kind,announce_tick,commit_tick,latency"]
        for tx in self.txs:
            if tx.commit_tick is None:
                lines.append(f"{tx.tx_id.hex()},{tx.kind.name},{tx.announce_tick},,")
            else:
                lines.append(
                    f"{tx.tx_id.hex()},{tx.kind.name},{tx.announce_tick},"
                    f"{tx.commit_tick},{tx.commit_tick - tx.announce_tick}"
                )
        lines.append("stalls")
        lines.append("start,end")
        for start, end in self.stalls:
            lines.append(f"{start},{'' if end is None else end}")
        for company, rendered in self.ranked:
            lines.append(f"ranked,{company}")
            lines.extend(rendered.rstrip("\n").splitlines())
        lines.append("summary")
        lines.append("node,digest")
        for name, digest in self.node_digests:
            lines.append(f"{name},{digest.hex()}")
        lines.append(f"final_height,{self.final_height}")
        lines.append(f"stalled,{'true' if self.stalled else 'false'}")
        lines.append(f"rejected_blocks,{self.rejected_blocks}")
        return "\n".join(lines) + "\n"


def measure_latency(report: SimReport, tx_ref: bytes | str) -> int:
    """Commit tick minus announce tick for one transaction in a report."""
    wanted = bytes.fromhex(tx_ref) if isinstance(tx_ref, str) else tx_ref
    for tx in report.txs:
        if tx.tx_id == wanted:
            if tx.commit_tick is None:
                raise TxNotCommitted(wanted.hex())
            return tx.commit_tick - tx.announce_tick
    raise TxNotCommitted(wanted.hex())


# --- the simulator --------------------------------------------------------------------------

@dataclass
class SimNode:
    name: str
    pid: bytes
    role: Role
    chain: Chain
    mempool: dict[bytes, Transaction] = field(default_factory=dict)
    records: AuthorityStore = field(default_factory=AuthorityStore)
    committed: set[bytes] = field(default_factory=set)


class _FederatedStore:
    """Routes authority lookups to the owning node's local record store."""

    def __init__(self, nodes_by_id: Mapping[bytes, SimNode]):
        self._nodes = nodes_by_id

    def statements(self, attester: bytes, subject: str, kind: ClaimKind) -> tuple[bytes, ...]:
        node = self._nodes.get(attester)
        if node is None:
            return ()
        return node.records.statements(attester, subject, kind)


class _Sim:
    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.directory, self.keyring = build_directory(scenario.roster)
        self.rule = DiversityRule(scenario.diversity)
        self.rng = random.Random(scenario.seed)
        by_name = {entry.name: entry for entry in scenario.roster}
        self.miner_ids = tuple(
            self.directory.by_name(name).id for name in scenario.miners
        )
        genesis = build_genesis(self.directory, self.keyring, self.miner_ids)
        apply_block_grants(self.directory, genesis, bootstrap=True)
        chain = Chain((genesis,))
        self.nodes = [
            SimNode(
                name=entry.name,
                pid=self.directory.by_name(entry.name).id,
                role=entry.role,
                chain=chain,
            )
            for entry in scenario.roster
        ]
        self.nodes_by_name = {node.name: node for node in self.nodes}
        self.nodes_by_id = {node.pid: node for node in self.nodes}
        self.fed_store = _FederatedStore(self.nodes_by_id)
        self.down: set[bytes] = set()
        self.queue: list[tuple[int, int, SimEvent]] = []
        self.seq = 0
        self.tx_meta: dict[bytes, TxReport] = {}
        self.tx_order: list[bytes] = []
        self.pending_height: int | None = None
        self.stalls: list[list[int | None]] = []
        self.stalling = False
        self.rejected = 0
        self.ranked: dict[str, RankedList] = {}
        self.ranked_order: list[str] = []
        self.staged_claims: dict[str, list[Claim]] = {}
        self.staged_order: list[str] = []
        self.requirements: dict[str, list[RequirementItem]] = {}
        self.nonces: dict[bytes, int] = {self.miner_ids[0]: 1}  # genesis grant used nonce 0
        self.last_tick = 0

    # -- scheduling helpers --------------------------------------------------

    def schedule(self, tick: int, kind: EventKind, payload: object) -> None:
        if tick > self.scenario.tick_limit:
            return
        heapq.heappush(self.queue, (tick, self.seq, SimEvent(tick, kind, payload)))
        self.seq += 1

    def next_nonce(self, author: bytes) -> int:
        nonce = self.nonces.get(author, 0)
        self.nonces[author] = nonce + 1
        return nonce

    def view_chain(self) -> Chain:
        return self.nodes[0].chain

    def miner_set(self) -> MinerSet | None:
        permitted = tuple(
            m for m in self.miner_ids if self.directory.has_right(m, Right.MINE)
        )
        if not permitted:
            return None
        return MinerSet.of(permitted, inactive=self.down)

    def resolve(self, name: str, what: str) -> bytes:
        participant = self.directory.by_name(name)
        if participant is None:
            raise MalformedScenario(f"{what} {name!r} is not a known participant")
        return participant.id

    # -- transaction submission ----------------------------------------------

    def announce_tx(self, tick: int, tx: Transaction) -> None:
        self.schedule(tick, EventKind.ANNOUNCE, tx)

    def submit(self, tick: int, kind: TxKind, payload: object, author: bytes) -> None:
        tx = make_transaction(
            kind, payload, author, self.next_nonce(author), self.keyring, self.directory
        )
        self.announce_tx(tick, tx)

    # -- event handlers ---------------------------------------------------------

    def on_announce(self, tick: int, tx: Transaction) -> None:
        txid = tx_id(tx)
        self.tx_meta[txid] = TxReport(txid, tx.kind, tick, None)
        self.tx_order.append(txid)
        for node in self.nodes:
            if self.scenario.loss and self.rng.random() < self.scenario.loss:
                continue
            delay = self.scenario.latency
            if self.scenario.jitter:
                delay += self.rng.randint(0, self.scenario.jitter)
            self.schedule(tick + delay, EventKind.DELIVER, ("tx", tx, node.name))

    def on_deliver(self, tick: int, payload: object) -> None:
        what, item, node_name = payload
        node = self.nodes_by_name[node_name]
        if what == "tx":
            txid = tx_id(item)
            if txid not in node.committed and txid not in node.mempool:
                node.mempool[txid] = item
            return
        # block delivery: append and clear its transactions from the mempool
        block: Block = item
        if block.header.prev_hash != block_id(node.chain.tip):
            return  # stale or out of order; lossless default never hits this
        node.chain = node.chain.append(block)
        for tx in block.transactions:
            txid = tx_id(tx)
            node.committed.add(txid)
            node.mempool.pop(txid, None)
        if node is self.nodes[0]:
            apply_block_grants(self.directory, block)
            for tx in block.transactions:
                txid = tx_id(tx)
                meta = self.tx_meta.get(txid)
                if meta is not None and meta.commit_tick is None:
                    self.tx_meta[txid] = replace(meta, commit_tick=tick)
            self.pending_height = None

    def on_validate(self, tick: int, height: int) -> None:
        if self.pending_height != height:
            return
        chain = self.view_chain()
        if chain.height + 1 != height:
            self.pending_height = None
            return
        miners = self.miner_set()
        if miners is None:
            self.pending_height = None
            return
        eligible = eligible_miners(chain, miners, self.rule)
        proposer = designated_proposer(height, miners, eligible)
        if proposer is None:
            self.pending_height = None
            return
        proposer_node = self.nodes_by_id[proposer]
        if not proposer_node.mempool:
            self.pending_height = None
            return
        if self.scenario.batch:
            txs = list(proposer_node.mempool.values())
        else:
            first = next(iter(proposer_node.mempool))
            txs = [proposer_node.mempool[first]]
        block = sign_block(
            build_block(proposer_node.chain.tip, txs, proposer, timestamp=tick),
            self.keyring,
            self.directory,
        )
        validator = designated_validator(proposer, miners)
        if validator is None:
            self.pending_height = None
            return
        outcome = approve_block(
            block,
            validator,
            chain,
            miners=miners,
            rule=self.rule,
            directory=self.directory,
            keyring=self.keyring,
        )
        if isinstance(outcome, Rejection):
            self.rejected += 1
            self.pending_height = None
            return
        self.schedule(tick + 1, EventKind.COMMIT, block)

    def on_commit(self, tick: int, block: Block) -> None:
        for node in self.nodes:
            self.schedule(
                tick + 1 + self.scenario.latency, EventKind.DELIVER, ("block", block, node.name)
            )

    def on_miner_down(self, name: str) -> None:
        self.down.add(self.resolve(name, "miner"))

    def on_miner_up(self, name: str) -> None:
        self.down.discard(self.resolve(name, "miner"))

    # -- client actions ---------------------------------------------------------

    def on_client_action(self, tick: int, action: ScriptAction) -> None:
        if isinstance(action, SeedRecord):
            node = self.nodes_by_name.get(action.authority)
            if node is None:
                raise MalformedScenario(f"record: unknown authority {action.authority!r}")
            fields = dict(action.fields)
            fields.setdefault("subject", action.subject)
            node.records.add(node.pid, action.kind, fields)
        elif isinstance(action, Require):
            self.resolve(action.company, "company")
            self.requirements.setdefault(action.company, []).append(action.item)
        elif isinstance(action, SubmitClaim):
            issuer = self.resolve(action.issuer, "issuer")
            ensure_applicant(action.applicant, self.directory, self.keyring)
            fields = dict(action.fields)
            fields.setdefault("subject", action.applicant)
            if action.applicant not in self.staged_claims:
                self.staged_claims[action.applicant] = []
                self.staged_order.append(action.applicant)
            self.staged_claims[action.applicant].append(
                make_claim(action.kind, issuer, fields)
            )
        elif isinstance(action, RunRanking):
            self.run_ranking(tick, action.company)
        elif isinstance(action, Hire):
            self.run_hire(tick, action)
        elif isinstance(action, HrEvent):
            self.run_hr_event(tick, action)
        elif isinstance(action, Grant):
            grantor = self.resolve(action.grantor, "grantor")
            subject = self.resolve(action.subject, "grant subject")
            self.submit(
                tick, TxKind.PERMISSION_GRANT, PermissionGrant(((subject, action.rights),)), grantor
            )

    def run_ranking(self, tick: int, company: str) -> None:
        company_id = self.resolve(company, "company")
        items = self.requirements.get(company)
        if not items:
            raise MalformedScenario(f"rank: no requirements staged for {company!r}")
        profiles = [
            ApplicantProfile(
                self.directory.by_name(name).id, tuple(self.staged_claims[name])
            )
            for name in self.staged_order
        ]
        spec = RequirementSpec(company_id, tuple(items))
        evaluation = evaluate_applicants(
            profiles, self.directory, self.fed_store, spec, self.keyring
        )
        if company not in self.ranked:
            self.ranked_order.append(company)
        self.ranked[company] = evaluation.ranked
        self.staged_claims.clear()
        self.staged_order.clear()
        for attestation in evaluation.attestations:
            self.submit(tick, TxKind.CLAIM_ATTESTATION, attestation, attestation.attester)

    def run_hire(self, tick: int, action: Hire) -> None:
        company_id = self.resolve(action.company, "company")
        applicant_id = self.resolve(action.applicant, "applicant")
        ranked = self.ranked.get(action.company)
        if ranked is None or all(a != applicant_id for a, _ in ranked.entries):
            raise MalformedScenario(
                f"hire: {action.applicant!r} is not on {action.company!r}'s ranked list"
            )
        sections: dict[str, dict[str, str]] = {name: dict(fields) for name, fields in action.sections}
        if not sections:
            sections = {
                "personal_info": {"name": action.applicant},
                "company_info": {"name": action.company},
            }
        contract = make_contract(sections, applicant_id, company_id, self.directory, self.keyring)
        verify_contract(contract, self.directory)
        self.submit(tick, TxKind.CONTRACT_RECORD, contract, company_id)

    def run_hr_event(self, tick: int, action: HrEvent) -> None:
        issuer = self.resolve(action.issuer, "issuer")
        subject = self.resolve(action.subject, "subject")
        if current_employer(self.view_chain(), subject) != issuer:
            raise NotCurrentEmployer(
                f"{action.issuer!r} does not employ {action.subject!r} at tick {tick}"
            )
        effective = tick if action.effective_tick is None else action.effective_tick
        event = make_hr_event(
            subject, action.kind, dict(action.fields), effective, issuer, self.directory, self.keyring
        )
        verify_hr_event(event, self.directory)
        self.submit(tick, TxKind.HR_EVENT_RECORD, event, issuer)

    # -- main loop ------------------------------------------------------------------

    def work_pending(self) -> bool:
        return any(node.mempool for node in self.nodes)

    def end_of_tick(self, tick: int) -> None:
        if self.pending_height is not None:
            return
        if not self.work_pending():
            return
        chain = self.view_chain()
        height = chain.height + 1
        miners = self.miner_set()
        eligible = eligible_miners(chain, miners, self.rule) if miners else set()
        proposer = designated_proposer(height, miners, eligible) if miners else None
        if proposer is None or designated_validator(proposer, miners) is None:
            if not self.stalling:
                self.stalling = True
                self.stalls.append([tick, None])
            return
        if self.stalling:
            self.stalling = False
            self.stalls[-1][1] = tick
        if not self.nodes_by_id[proposer].mempool:
            return  # announced work still in transit to the proposer
        self.pending_height = height
        self.schedule(tick + 1, EventKind.VALIDATE, height)

    def run(self) -> SimReport:
        for window in self.scenario.inactivity:
            self.schedule(window.start, EventKind.MINER_DOWN, window.miner)
            if window.end is not None:
                self.schedule(window.end + 1, EventKind.MINER_UP, window.miner)
        for action in self.scenario.script:
            self.schedule(action.tick, EventKind.CLIENT_ACTION, action)

        while self.queue:
            tick = self.queue[0][0]
            self.last_tick = tick
            while self.queue and self.queue[0][0] == tick:
                _, _, event = heapq.heappop(self.queue)
                self.dispatch(event)
            self.end_of_tick(tick)

        stalled = self.work_pending()
        if self.stalling and not stalled:
            # eligibility returned right at the end with nothing left to mine
            self.stalls[-1][1] = self.last_tick
        report = SimReport(
            node_digests=tuple(
                (node.name, double_hash(encode_chain(node.chain))) for node in self.nodes
            ),
            final_height=self.view_chain().height,
            txs=tuple(self.tx_meta[txid] for txid in self.tx_order),
            stalls=tuple((start, end) for start, end in self.stalls),
            rejected_blocks=self.rejected,
            stalled=stalled,
            ranked=tuple(
                (company, export_ranked_list(self.ranked[company], self.directory))
                for company in self.ranked_order
            ),
            chains=tuple((node.name, node.chain) for node in self.nodes),
        )
        return report

    def dispatch(self, event: SimEvent) -> None:
        if event.kind is EventKind.ANNOUNCE:
            self.on_announce(event.tick, event.payload)
        elif event.kind is EventKind.DELIVER:
            self.on_deliver(event.tick, event.payload)
        elif event.kind is EventKind.VALIDATE:
            self.on_validate(event.tick, event.payload)
        elif event.kind is EventKind.COMMIT:
            self.on_commit(event.tick, event.payload)
        elif event.kind is EventKind.MINER_DOWN:
            self.on_miner_down(event.payload)
        elif event.kind is EventKind.MINER_UP:
            self.on_miner_up(event.payload)
        elif event.kind is EventKind.CLIENT_ACTION:
            self.on_client_action(event.tick, event.payload)


def run(scenario: Scenario) -> SimReport:
    """Execute a scenario to quiescence or its tick limit."""
    _check_scenario(scenario)
    return _Sim(scenario).run()
