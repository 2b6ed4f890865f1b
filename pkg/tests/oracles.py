"""Independent reference implementations used only to check the package.

Nothing here imports the production hashing or ranking paths: the SHA-256
is written straight from the FIPS 180-4 definition (round constants derived
with integer roots, not copied), the Merkle oracle builds explicit levels,
and the ranking oracle is a flat verify/filter/score/sort pipeline with
subset-enumeration scoring.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations
from typing import Mapping, Sequence

from hirechain.recruit import (
    ApplicantProfile,
    Claim,
    ClaimKind,
    DiscardReason,
    RequirementSpec,
    Verdict,
)
from hirechain.registry import Directory, Right, Role


# --- reference SHA-256 -------------------------------------------------------------

def _first_primes(count: int) -> list[int]:
    primes: list[int] = []
    candidate = 2
    while len(primes) < count:
        if all(candidate % p for p in primes):
            primes.append(candidate)
        candidate += 1
    return primes


def _iroot(n: int, k: int) -> int:
    """Floor k-th root by Newton iteration on integers."""
    if n == 0:
        return 0
    x = 1 << ((n.bit_length() + k - 1) // k)
    while True:
        y = ((k - 1) * x + n // x ** (k - 1)) // k
        if y >= x:
            return x
        x = y


_PRIMES = _first_primes(64)
_H0 = [_iroot(p << 64, 2) & 0xFFFFFFFF for p in _PRIMES[:8]]
_K = [_iroot(p << 96, 3) & 0xFFFFFFFF for p in _PRIMES]


def _rotr(x: int, n: int) -> int:
    return ((x >> n) | (x << (32 - n))) & 0xFFFFFFFF


def reference_sha256(data: bytes) -> bytes:
    state = list(_H0)
    msg = bytearray(data)
    bit_len = len(data) * 8
    msg.append(0x80)
    while len(msg) % 64 != 56:
        msg.append(0)
    msg += bit_len.to_bytes(8, "big")
    mask = 0xFFFFFFFF
    constants = _K
    for off in range(0, len(msg), 64):
        w = [int.from_bytes(msg[off + 4 * i:off + 4 * i + 4], "big") for i in range(16)]
        for i in range(16, 64):
            x = w[i - 15]
            s0 = (((x >> 7) | (x << 25)) ^ ((x >> 18) | (x << 14)) ^ (x >> 3)) & mask
            x = w[i - 2]
            s1 = (((x >> 17) | (x << 15)) ^ ((x >> 19) | (x << 13)) ^ (x >> 10)) & mask
            w.append((w[i - 16] + s0 + w[i - 7] + s1) & mask)
        a, b, c, d, e, f, g, h = state
        for i in range(64):
            big_s1 = (((e >> 6) | (e << 26)) ^ ((e >> 11) | (e << 21)) ^ ((e >> 25) | (e << 7))) & mask
            ch = (e & f) ^ (~e & mask & g)
            t1 = (h + big_s1 + ch + constants[i] + w[i]) & mask
            big_s0 = (((a >> 2) | (a << 30)) ^ ((a >> 13) | (a << 19)) ^ ((a >> 22) | (a << 10))) & mask
            maj = (a & b) ^ (a & c) ^ (b & c)
            t2 = (big_s0 + maj) & mask
            h, g, f, e = g, f, e, (d + t1) & mask
            d, c, b, a = c, b, a, (t1 + t2) & mask
        state = [(x + y) & mask for x, y in zip(state, (a, b, c, d, e, f, g, h))]
    return b"".join(x.to_bytes(4, "big") for x in state)


def reference_double_sha256(data: bytes) -> bytes:
    return reference_sha256(reference_sha256(data))


# --- merkle tree oracle -----------------------------------------------------------------

def merkle_root_oracle(leaf_payloads: Sequence[bytes]) -> bytes:
    """Build every tree level explicitly, duplicating the last node of odd levels."""
    if not leaf_payloads:
        raise ValueError("no leaves")
    levels = [[reference_double_sha256(p) for p in leaf_payloads]]
    while len(levels[-1]) > 1:
        current = list(levels[-1])
        if len(current) % 2 == 1:
            current.append(current[-1])
        levels.append(
            [reference_double_sha256(current[i] + current[i + 1]) for i in range(0, len(current), 2)]
        )
    return levels[-1][0]


# --- ranking pipeline oracle ----------------------------------------------------------------

class StoreView:
    def statements(self, attester: bytes, subject: str, kind: ClaimKind) -> tuple[bytes, ...]:
        raise NotImplementedError


def _oracle_attester(claim: Claim, directory: Directory) -> bytes | None:
    if claim.kind is ClaimKind.HEALTH_RECORD:
        wanted = Role.HEALTH_AUTHORITY
    elif claim.kind is ClaimKind.CRIMINAL_RECORD:
        wanted = Role.LAW_AGENCY
    else:
        issuer = directory.get(claim.issuer)
        if (
            issuer is not None
            and issuer.role is Role.EMPLOYER
            and directory.has_right(issuer.id, Right.ATTEST)
        ):
            return issuer.id
        return None
    for participant in directory:
        if participant.role is wanted and directory.has_right(participant.id, Right.ATTEST):
            return participant.id
    return None


def _oracle_fields(claim: Claim) -> dict[str, str]:
    from hirechain._wire import decode_record

    try:
        return decode_record(claim.statement)
    except Exception:
        return {}


def _oracle_verdict(claim: Claim, directory: Directory, store) -> Verdict:
    attester = _oracle_attester(claim, directory)
    if attester is None:
        return Verdict.UNKNOWN
    subject = _oracle_fields(claim).get("subject")
    if subject is None:
        return Verdict.UNKNOWN
    stored = store.statements(attester, subject, claim.kind)
    if claim.statement in stored:
        return Verdict.CONFIRMED
    if stored:
        return Verdict.REFUTED
    return Verdict.UNKNOWN


def _oracle_screen(
    profile: ApplicantProfile, verdicts: Mapping[bytes, Verdict]
) -> DiscardReason | None:
    fake = (ClaimKind.EDUCATION, ClaimKind.TRAINING, ClaimKind.CERTIFICATE)
    for claim in profile.claims:
        if reference_double_sha256(claim.statement) != claim.evidence_hash:
            return DiscardReason.INCONSISTENT_DATA
        verdict = verdicts[claim.evidence_hash]
        if verdict is Verdict.REFUTED:
            if claim.kind in fake:
                return DiscardReason.FAKE_CERTIFICATE
            if claim.kind is ClaimKind.CRIMINAL_RECORD:
                return DiscardReason.LAW_ISSUE
            if claim.kind is ClaimKind.PERFORMANCE:
                return DiscardReason.BEHAVIOURAL_ISSUE
            return DiscardReason.INCONSISTENT_DATA
        if verdict is Verdict.CONFIRMED and _oracle_fields(claim).get("adverse") == "true":
            if claim.kind is ClaimKind.CRIMINAL_RECORD:
                return DiscardReason.LAW_ISSUE
            if claim.kind is ClaimKind.PERFORMANCE:
                return DiscardReason.BEHAVIOURAL_ISSUE
    return None


def _oracle_score(
    profile: ApplicantProfile,
    verdicts: Mapping[bytes, Verdict],
    spec: RequirementSpec,
) -> Fraction | None:
    """Enumerate every item subset and keep the heaviest satisfiable one."""
    confirmed = [
        (claim.kind, _oracle_fields(claim))
        for claim in profile.claims
        if verdicts[claim.evidence_hash] is Verdict.CONFIRMED
    ]

    def satisfied(item) -> bool:
        return any(
            kind == item.kind and item.predicate.evaluate(fields) for kind, fields in confirmed
        )

    for item in spec.items:
        if item.mandatory and not satisfied(item):
            return None
    best = Fraction(0)
    indices = range(len(spec.items))
    for size in range(len(spec.items) + 1):
        for subset in combinations(indices, size):
            if all(satisfied(spec.items[i]) for i in subset):
                total = sum((spec.items[i].weight for i in subset), Fraction(0))
                if total > best:
                    best = total
    return best


def oracle_rank(
    profiles: Sequence[ApplicantProfile],
    directory: Directory,
    store,
    spec: RequirementSpec,
) -> tuple[list[tuple[bytes, Fraction]], list[tuple[bytes, DiscardReason]]]:
    """Flat reference pipeline: verify everything, filter, score, stable sort."""
    scored: list[tuple[bytes, Fraction]] = []
    discarded: list[tuple[bytes, DiscardReason]] = []
    for profile in profiles:
        # one verdict per distinct evidence hash; the first occurrence of a
        # duplicated statement defines the claim (and its issuer)
        verdicts: dict[bytes, Verdict] = {}
        for claim in profile.claims:
            if claim.evidence_hash not in verdicts:
                verdicts[claim.evidence_hash] = _oracle_verdict(claim, directory, store)
        reason = _oracle_screen(profile, verdicts)
        if reason is not None:
            discarded.append((profile.applicant, reason))
            continue
        score = _oracle_score(profile, verdicts, spec)
        if score is None:
            discarded.append((profile.applicant, DiscardReason.MANDATORY_UNMET))
        else:
            scored.append((profile.applicant, score))
    # two stable passes instead of one compound key
    scored.sort(key=lambda entry: entry[0])
    scored.sort(key=lambda entry: entry[1], reverse=True)
    return scored, discarded
