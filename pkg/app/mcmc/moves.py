"""
Metropolis-within-Gibbs 的各类更新

p、φ 用 Beta 全条件分布直接抽取；β 逐个做高斯随机游走（负值直接拒绝）；
定植时间用添加、删除、移动三种提议。
"""
import math

import numpy as np

from app.mcmc.state import ChainState


INF = math.inf


def _accept(rng: np.random.Generator, log_ratio: float) -> bool:
    if log_ratio == -INF or math.isnan(log_ratio):
        return False
    if log_ratio >= 0:
        return True
    return math.log(rng.random()) < log_ratio


def add_log_ratio(n0: int, n1: int, width: float, phi0: float, at_admission: bool) -> float:
    """
    添加提议中除后验比以外的对数因子

    Args:
        n0: 提议前 𝒩₀ 的大小
        n1: 提议前 𝒩₁ 的大小
        width: d_j − a_j
        phi0: 入院即定植的提议概率
        at_admission: 提议值是否为 c_j = a_j
    """
    if at_admission:
        return math.log(n0) - math.log(phi0 * (n1 + 1))
    return math.log(n0 * width) - math.log((1 - phi0) * (n1 + 1))


def delete_log_ratio(n0: int, n1: int, width: float, phi0: float, at_admission: bool) -> float:
    """删除提议的对数因子，n0、n1 为提议前的集合大小；与添加提议互为倒数"""
    if at_admission:
        return math.log(phi0 * n1) - math.log(n0 + 1)
    return math.log((1 - phi0) * n1) - math.log((n0 + 1) * width)


def shift_log_density(x: float, a: float, t: float, phi0: float) -> float:
    """
    移动提议 q(x) 的对数密度（省略对所有候选相同的 1/(n₁+n_p)）

    x = a 处为点质量 φ₀，(a, t] 上为均匀密度 (1−φ₀)/(t−a)。
    """
    if x == a:
        return math.log(phi0)
    return math.log(1 - phi0) - math.log(t - a)


def gibbs_update_p(state: ChainState) -> None:
    """p ~ Beta(α_p + n_TP, β_p + n_FN)"""
    prior = state.prior
    state.p = float(state.rng.beta(prior.p_alpha + state.n_TP, prior.p_beta + state.n_FN))


def gibbs_update_phi(state: ChainState) -> None:
    """φ ~ Beta(α_φ + n_CA, β_φ + n_A − n_CA)"""
    prior = state.prior
    state.phi = float(
        state.rng.beta(prior.phi_alpha + state.n_CA, prior.phi_beta + state.n_A - state.n_CA)
    )


def rw_update_betas(state: ChainState, rw_sd) -> None:
    """逐个 β 做高斯随机游走，先验比为 exp(−r·Δβ)"""
    rates = state.prior.rates
    for k in range(3):
        name = f"beta{k}"
        current = state.betas[k]
        proposed = current + state.rng.normal(0.0, rw_sd[k])
        if proposed < 0:
            state.counter.record(name, False)
            continue
        betas = state.betas.copy()
        betas[k] = proposed
        transmission = state.statistics.log_term(betas)
        log_ratio = (transmission - state.transmission) - rates[k] * (proposed - current)
        accepted = _accept(state.rng, log_ratio)
        if accepted:
            state.betas = betas
            state.transmission = transmission
        state.counter.record(name, accepted)


def move_add_colonization(state: ChainState) -> bool:
    """从 𝒩₀ 中选一个住院段加上定植时间"""
    n0, n1 = len(state.n0), len(state.n1)
    if n0 == 0:
        state.counter.record("add", False)
        return False
    rng = state.rng
    j = state.n0.choice(rng)
    a, d = state.arrays.a[j], state.arrays.d[j]
    at_admission = rng.random() < state.phi0
    new_c = a if at_admission else rng.uniform(a, d)

    proposal = state.propose(j, float(new_c))
    log_ratio = state.proposal_log_ratio(proposal) + add_log_ratio(n0, n1, d - a, state.phi0, at_admission)
    accepted = _accept(rng, log_ratio)
    if accepted:
        state.commit(proposal)
    state.counter.record("add", accepted)
    return accepted


def move_delete_colonization(state: ChainState) -> bool:
    """从 𝒩₁ 中选一个住院段去掉定植时间"""
    n0, n1 = len(state.n0), len(state.n1)
    if n1 == 0:
        state.counter.record("delete", False)
        return False
    rng = state.rng
    j = state.n1.choice(rng)
    a, d = state.arrays.a[j], state.arrays.d[j]
    at_admission = state.c[j] == a

    proposal = state.propose(j, INF)
    log_ratio = state.proposal_log_ratio(proposal) + delete_log_ratio(n0, n1, d - a, state.phi0, at_admission)
    accepted = _accept(rng, log_ratio)
    if accepted:
        state.commit(proposal)
    state.counter.record("delete", accepted)
    return accepted


def move_shift_colonization(state: ChainState) -> bool:
    """
    在 𝒩₁ ∪ 𝒫 中选一个住院段，重新提议其定植时间

    𝒩₁ 的上界 t_j = d_j，𝒫 的上界为首次阳性检测时间；再入院定植从不更新。
    首次阳性即在入院时刻（t_j = a_j）的住院段没有可移动的空间，记为拒绝。
    """
    arrays = state.arrays
    n1 = len(state.n1)
    n_candidates = n1 + arrays.positive_idx.size
    if n_candidates == 0:
        state.counter.record("shift", False)
        return False
    rng = state.rng
    index = int(rng.integers(n_candidates))
    if index < n1:
        j = state.n1[index]
        upper = arrays.d[j]
    else:
        j = int(arrays.positive_idx[index - n1])
        upper = arrays.first_positive[j]
    a = arrays.a[j]
    if upper <= a:
        state.counter.record("shift", False)
        return False

    at_admission = rng.random() < state.phi0
    new_c = float(a if at_admission else rng.uniform(a, upper))
    current = float(state.c[j])
    proposal = state.propose(j, new_c)
    log_ratio = (
        state.proposal_log_ratio(proposal)
        + shift_log_density(current, a, upper, state.phi0)
        - shift_log_density(new_c, a, upper, state.phi0)
    )
    accepted = _accept(rng, log_ratio)
    if accepted:
        state.commit(proposal)
    state.counter.record("shift", accepted)
    return accepted


COLONIZATION_MOVES = (move_add_colonization, move_delete_colonization, move_shift_colonization)
