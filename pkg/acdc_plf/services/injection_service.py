"""
Mapping of stochastic sources onto network injection columns, injection
cumulants and joint injection sampling
"""
import logging
from typing import Dict, List, Optional, Tuple

import numpy as np

from acdc_plf.config import settings
from acdc_plf.exceptions import InvalidStochasticSpecError, Violation
from acdc_plf.models.grid import NetworkCase
from acdc_plf.models.results import CorrelationGroup, InjectionMap, InjectionMember
from acdc_plf.models.stochastic import CumulantSet, StochasticSpec
from acdc_plf.services.network_service import CompiledNetwork, compile_network
from acdc_plf.services.stochastic_service import (
    build_nataf_sampler,
    correlated_samples,
    empirical_marginal,
    load_marginals,
    marginal_cumulants,
    parametric_marginal,
    pv_marginal,
    standard_normals,
    to_uniform,
)

logger = logging.getLogger(__name__)

# Sub-stream namespaces of the master seed
CUMULANT_STREAM = 0
MCS_STREAM = 1


def _locate(net: CompiledNetwork, kind: str, source_id: str, side: str, bus: int, quantity: str,
            violations: List[Violation]) -> Optional[int]:
    index = net.dc_index if side == "dc" else net.ac_index
    if bus not in index:
        violations.append(Violation("unknown bus", kind, source_id, f"{side.upper()} bus {bus} does not exist"))
        return None
    if side == "dc" and quantity != "p":
        violations.append(Violation("reactive power on DC bus", kind, source_id,
                                    "DC buses only carry active power"))
        return None
    return net.injection_column(side, bus, quantity)


def build_injection_map(case: NetworkCase, spec: StochasticSpec, net: Optional[CompiledNetwork] = None) -> InjectionMap:
    """Resolve every source to marginals on injection columns; loads enter with sign -1"""
    net = net or compile_network(case)
    violations: List[Violation] = []
    members: List[InjectionMember] = []
    keys: Dict[Tuple[str, str], int] = {}
    s_base = case.base.s_ac_base

    def add(kind, source, quantity, side, bus, sign, marginal):
        column = _locate(net, kind, source, side, bus, quantity, violations)
        if column is None:
            return
        if (source, quantity) in keys:
            violations.append(Violation("duplicate id", kind, source, f"source id '{source}' used twice"))
            return
        keys[(source, quantity)] = len(members)
        members.append(InjectionMember(marginal.name, source, column, sign, marginal))

    for pv in spec.pv:
        try:
            marginal = pv_marginal(pv, s_base)
        except ValueError as e:
            violations.append(Violation("invalid PV model", "pv", pv.id, str(e)))
            continue
        add("pv", pv.id, "p", pv.side, pv.bus, 1.0, marginal)
    for load in spec.loads:
        p, q = load_marginals(load)
        add("load", load.id, "p", load.side, load.bus, -1.0, p)
        if load.q_mean != 0 or load.q_std != 0:
            add("load", load.id, "q", load.side, load.bus, -1.0, q)
    for item in spec.empirical:
        add("empirical", item.id, item.quantity, item.side, item.bus, item.sign, empirical_marginal(item))
    for item in spec.parametric:
        try:
            marginal = parametric_marginal(item)
        except ValueError as e:
            violations.append(Violation("invalid distribution", "parametric", item.id, str(e)))
            continue
        add("parametric", item.id, item.quantity, item.side, item.bus, item.sign, marginal)

    groups: List[CorrelationGroup] = []
    for spec_group in spec.correlation_groups:
        idx = []
        for member in spec_group.members:
            k = keys.get((member.source, member.quantity))
            if k is None:
                violations.append(Violation("unknown source", "correlation_group", spec_group.id,
                                            f"no source '{member.source}' ({member.quantity})"))
            elif members[k].group is not None:
                violations.append(Violation("source in two groups", "correlation_group", spec_group.id,
                                            f"'{member.source}' already belongs to group '{members[k].group}'"))
            else:
                members[k].group = spec_group.id
                idx.append(k)
        matrix = np.asarray(spec_group.matrix, dtype=float)
        if matrix.shape != (len(spec_group.members), len(spec_group.members)):
            violations.append(Violation("group matrix size", "correlation_group", spec_group.id,
                                        f"matrix {matrix.shape} for {len(spec_group.members)} members"))
            continue
        if len(idx) == len(spec_group.members):
            groups.append(CorrelationGroup(spec_group.id, idx, matrix))

    if violations:
        raise InvalidStochasticSpecError(violations)
    logger.info("Mapped %d stochastic injections (%d correlation groups)", len(members), len(groups))
    return InjectionMap(
        labels=net.injection_labels(),
        members=members,
        groups=groups,
        deterministic=net.schedule.copy(),
    )


def active_members(imap: InjectionMap, group: CorrelationGroup) -> Tuple[List[int], np.ndarray]:
    """Members of a group with nonzero spread and their correlation submatrix"""
    keep = [i for i, k in enumerate(group.members) if imap.members[k].marginal.std > 0]
    return [group.members[i] for i in keep], group.matrix[np.ix_(keep, keep)]


def is_identity_group(imap: InjectionMap, group: CorrelationGroup) -> bool:
    members, matrix = active_members(imap, group)
    return len(members) < 2 or np.array_equal(matrix, np.eye(len(members)))


def member_cumulants(imap: InjectionMap, k: int, order: int, seed: int,
                     sample_size: int = settings.cumulant_sample_size) -> CumulantSet:
    """Cumulants of one member as a signed injection"""
    m = imap.members[k]
    c = marginal_cumulants(m.marginal, order, seed, (CUMULANT_STREAM, 0, k), sample_size)
    return c.affine(m.sign)


def injection_cumulants(imap: InjectionMap, members: List[int], order: int, seed: int,
                        sample_size: int = settings.cumulant_sample_size) -> Dict[int, CumulantSet]:
    """Per injection column, the summed cumulants of independent members"""
    out: Dict[int, CumulantSet] = {}
    for k in members:
        c = member_cumulants(imap, k, order, seed, sample_size)
        column = imap.members[k].column
        out[column] = out[column] + c if column in out else c
    return out


def sample_members(imap: InjectionMap, n_draws: int, seed: int, namespace: int = MCS_STREAM) -> np.ndarray:
    """(n_draws, n_members) joint draws; correlated groups through the Nataf sampler"""
    draws = np.empty((n_draws, len(imap.members)))
    grouped = imap.grouped()
    for gi, group in enumerate(imap.groups):
        members, matrix = active_members(imap, group)
        for k in set(group.members) - set(members):
            draws[:, k] = imap.members[k].marginal.mean
        if not members:
            continue
        sampler = build_nataf_sampler(matrix, [imap.members[k].marginal for k in members], seed, stream=gi)
        draws[:, members] = correlated_samples(sampler, n_draws, stream=(namespace, 1))
        if sampler.repaired:
            logger.warning("Correlation group '%s' needed a positive-definite repair", group.id)
    for k, m in enumerate(imap.members):
        if k in grouped:
            continue
        e = standard_normals(seed, (namespace, 0, k), n_draws, 1)[:, 0]
        draws[:, k] = m.marginal.ppf(to_uniform(e))
    return draws


def schedules(imap: InjectionMap, draws: np.ndarray) -> np.ndarray:
    """Full injection schedules W for every draw"""
    mapping = np.zeros((len(imap.members), imap.deterministic.size))
    for k, m in enumerate(imap.members):
        mapping[k, m.column] += m.sign
    return imap.deterministic[None, :] + draws @ mapping
