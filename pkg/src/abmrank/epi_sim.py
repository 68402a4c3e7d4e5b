"""Minimal agent-based epidemic simulator with weekly policy actions.

A community of agents moves between home, work/school and shops on a
six-tick day.  Infection spreads per tick among co-located agents,
disease progresses once per day through nine compartments, and
households earn and consume a stock that defines poverty.  Every
``policy_period_ticks`` a policy picks lockdown and vaccination-drive
windows for the coming week.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, fields, replace
from typing import Callable, Sequence

import numpy as np

from .traces import Episode, Kind, Step

log = logging.getLogger(__name__)

N_ACTION = 8
MAX_DAYS = 7.0
AGE_GROUPS = ((0, 17), (18, 59), (60, 99))


class C(enum.IntEnum):
    """Disease compartments."""

    S = 0   # susceptible
    E = 1   # exposed
    A = 2   # asymptomatic
    IM = 3  # infected, mild
    IS = 4  # infected, severe
    H = 5   # hospitalized
    R = 6   # recovered
    D = 7   # deceased
    P = 8   # protected (vaccinated, reduced susceptibility)


INFECTIOUS = (C.A, C.IM, C.IS)
SUSCEPTIBLE = (C.S, C.P)


class Mask(enum.IntEnum):
    NONE = 0
    HIGH = 1
    LOW = 2


class Role(str, enum.Enum):
    STUDENT = "Student"
    EMPLOYED = "Employed"


class SimConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    population: int = 1000
    days: int = 100
    ticks_per_day: int = 6
    policy_period_ticks: int = 42
    home_ticks: tuple[int, ...] = (0, 1)
    work_ticks: tuple[int, ...] = (2, 3, 4)
    shop_tick: int = 5

    household_size: int = 4
    workplace_size: int = 20
    school_size: int = 50
    n_shops: int = 10
    age_group_weights: tuple[float, float, float] = (0.22, 0.56, 0.22)
    employment_age: int = 30
    shop_preference: tuple[float, float] = (0.2, 0.8)
    initial_exposed: int = 10

    beta: float = 0.03
    masks_at_home: bool = False
    mask_efficacy: tuple[float, float] = (0.8, 0.4)
    mask_stock: tuple[int, int] = (500, 1000)
    vaccine_efficacy: tuple[float, float] = (0.8, 0.6)
    vaccine_doses_per_day: tuple[int, int] = (6, 6)
    vaccine_consent: float = 1.0

    # mean dwell days in each progressing compartment
    dwell_exposed: float = 3.0
    dwell_asymptomatic: float = 7.0
    dwell_mild: float = 7.0
    dwell_severe: float = 3.0
    dwell_hospital: float = 10.0
    p_symptomatic: float = 0.6
    p_severe: float = 0.15
    p_hospital: float = 1.0
    p_death: float = 0.1
    hospital_capacity_frac: float = 0.1
    severe_stay_home: bool = True

    consumption_per_member: float = 1.0
    wage: float = 6.0
    initial_stock_days: float = 7.0
    stock_cap_days: float = 14.0
    bpl_threshold_days: float = 3.0

    reward_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    seed: int = 0

    @property
    def total_ticks(self) -> int:
        return self.days * self.ticks_per_day

    @property
    def n_policy_steps(self) -> int:
        return self.total_ticks // self.policy_period_ticks

    @property
    def n_households(self) -> int:
        return self.population // self.household_size

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = set(data) - set(known)
        if unknown:
            raise SimConfigError(f"unknown simulation parameters: {sorted(unknown)}")
        kw = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
        return cls(**kw)

    def with_overrides(self, **kw) -> "SimConfig":
        kw = {k: tuple(v) if isinstance(v, list) else v for k, v in kw.items()}
        return replace(self, **kw)

    def validate(self) -> None:
        if self.population < 1:
            raise SimConfigError("population must be positive")
        if self.household_size < 1 or self.n_households < 1:
            raise SimConfigError("need at least one household")
        if self.workplace_size < 1 or self.school_size < 1 or self.n_shops < 1:
            raise SimConfigError("workplace, school and shop counts must be positive")
        if self.ticks_per_day < 1 or self.policy_period_ticks < 1:
            raise SimConfigError("tick counts must be positive")
        if not 0 <= self.initial_exposed <= self.population:
            raise SimConfigError("initial_exposed outside [0, population]")
        if min(self.reward_weights) < 0:
            raise SimConfigError("reward weights must be non-negative")
        if abs(sum(self.age_group_weights) - 1.0) > 1e-9:
            raise SimConfigError("age_group_weights must sum to 1")


@dataclass
class World:
    config: SimConfig
    age: np.ndarray
    group: np.ndarray          # age-group index 0..2
    employed: np.ndarray       # bool
    household: np.ndarray      # household id == home location id
    work_loc: np.ndarray       # global location id of workplace or school
    shop_pref: np.ndarray
    consent: np.ndarray
    mask: np.ndarray           # Mask
    mask_eff: np.ndarray
    vaccine: np.ndarray        # 0 none, 1 V1, 2 V2
    vacc_eff: np.ndarray
    comp: np.ndarray
    days_in_comp: np.ndarray
    stock: np.ndarray          # per household
    members: np.ndarray        # per household
    n_locations: int
    shop_offset: int
    ever_infected: np.ndarray
    lockdown: bool = False
    clamp_warnings: int = 0

    def role(self, agent: int) -> Role:
        return Role.EMPLOYED if self.employed[agent] else Role.STUDENT

    def counts(self) -> np.ndarray:
        return np.bincount(self.comp, minlength=len(C))

    def consumption(self) -> np.ndarray:
        return self.members * self.config.consumption_per_member

    def bpl(self) -> np.ndarray:
        return self.stock < self.config.bpl_threshold_days * self.consumption()


def role_for_age(age: int, employment_age: int = 30) -> Role:
    return Role.EMPLOYED if age >= employment_age else Role.STUDENT


def build_world(config: SimConfig, seed: int | None = None) -> World:
    """Create the agent population; deterministic given the seed."""
    config.validate()
    rng = np.random.default_rng(config.seed if seed is None else seed)
    n = config.population

    group = rng.choice(3, size=n, p=config.age_group_weights)
    lo = np.array([g[0] for g in AGE_GROUPS])[group]
    hi = np.array([g[1] for g in AGE_GROUPS])[group]
    age = rng.integers(lo, hi + 1)
    employed = age >= config.employment_age

    n_house = config.n_households
    workers = np.flatnonzero(employed)
    if workers.size < n_house:
        raise SimConfigError(
            f"{workers.size} employed agents cannot head {n_house} households")
    # every household gets one earner, the rest are spread round-robin
    heads = rng.permutation(workers)[:n_house]
    household = np.empty(n, dtype=np.int64)
    household[heads] = np.arange(n_house)
    rest = np.setdiff1d(np.arange(n), heads)
    rest = rng.permutation(rest)
    household[rest] = np.arange(rest.size) % n_house
    members = np.bincount(household, minlength=n_house).astype(float)

    offset = n_house
    work_loc = np.empty(n, dtype=np.int64)
    emp = np.flatnonzero(employed)
    n_work = max(1, -(-emp.size // config.workplace_size))
    work_loc[emp] = offset + rng.permutation(emp.size) % n_work
    offset += n_work
    stu = np.flatnonzero(~employed)
    n_school = max(1, -(-stu.size // config.school_size))
    work_loc[stu] = offset + rng.permutation(stu.size) % n_school
    offset += n_school
    shop_offset = offset
    n_locations = offset + config.n_shops

    shop_pref = rng.uniform(*config.shop_preference, size=n)
    consent = rng.random(n) < config.vaccine_consent

    mask = np.zeros(n, dtype=np.int64)
    order = rng.permutation(n)
    n_high = min(config.mask_stock[0], n)
    mask[order[:n_high]] = Mask.HIGH
    n_low = min(config.mask_stock[1], n - n_high)
    mask[order[n_high:n_high + n_low]] = Mask.LOW
    eff_lookup = np.array([0.0, config.mask_efficacy[0], config.mask_efficacy[1]])
    mask_eff = eff_lookup[mask]

    comp = np.full(n, C.S, dtype=np.int64)
    seeds = rng.choice(n, size=config.initial_exposed, replace=False)
    comp[seeds] = C.E
    ever = np.zeros(n, dtype=bool)
    ever[seeds] = True

    stock = config.initial_stock_days * members * config.consumption_per_member
    return World(
        config=config, age=age, group=group, employed=employed, household=household,
        work_loc=work_loc, shop_pref=shop_pref, consent=consent, mask=mask,
        mask_eff=mask_eff, vaccine=np.zeros(n, dtype=np.int64), vacc_eff=np.zeros(n),
        comp=comp, days_in_comp=np.zeros(n, dtype=np.int64), stock=stock,
        members=members, n_locations=n_locations, shop_offset=shop_offset,
        ever_infected=ever,
    )


def schedule_location(world: World, agent: int, tick_of_day: int, shops: bool | None = None,
                      shop_id: int = 0) -> int:
    """Location of one agent at ``tick_of_day``.

    ``shops`` is the agent's shopping draw for the day; ``shop_id`` the
    shop (0-based) visited when shopping.
    """
    cfg = world.config
    home = int(world.household[agent])
    if world.comp[agent] in (C.H, C.D):
        return home
    if cfg.severe_stay_home and world.comp[agent] == C.IS:
        return home
    if tick_of_day in cfg.work_ticks:
        return home if world.lockdown else int(world.work_loc[agent])
    if tick_of_day == cfg.shop_tick:
        if world.lockdown or not shops:
            return home
        return world.shop_offset + shop_id
    return home


def infection_probability(beta: float, n_infectious: int, source_mask_eff: float,
                          target_mask_eff: float = 0.0, target_vacc_eff: float = 0.0) -> float:
    """Chance a susceptible agent is exposed at a location in one tick.

    ``source_mask_eff`` is the mean mask efficacy of the infectious agents.
    """
    if n_infectious == 0:
        return 0.0
    b = beta * (1 - source_mask_eff) * (1 - target_mask_eff) * (1 - target_vacc_eff)
    return 1.0 - (1.0 - b) ** n_infectious


def locations(world: World, tick_of_day: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorized :func:`schedule_location` for all agents (draws shop visits)."""
    cfg = world.config
    loc = world.household.copy()
    if tick_of_day in cfg.work_ticks and not world.lockdown:
        loc = world.work_loc.copy()
    elif tick_of_day == cfg.shop_tick and not world.lockdown:
        u = rng.random(loc.size)
        shop = rng.integers(0, cfg.n_shops, size=loc.size)
        going = u < world.shop_pref
        loc[going] = world.shop_offset + shop[going]
    stay = (world.comp == C.H) | (world.comp == C.D)
    if cfg.severe_stay_home:
        stay |= world.comp == C.IS
    loc[stay] = world.household[stay]
    return loc


def transmission_update(world: World, loc: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Expose susceptible agents sharing a location with infectious ones; returns new exposures."""
    cfg = world.config
    comp = world.comp
    inf = (comp == C.A) | (comp == C.IM) | (comp == C.IS)
    if not inf.any() or cfg.beta == 0:
        return np.empty(0, dtype=np.int64)
    worn = world.mask_eff
    if not cfg.masks_at_home:
        worn = np.where(loc < world.config.n_households, 0.0, worn)
    n_inf = np.bincount(loc[inf], minlength=world.n_locations)
    src = np.bincount(loc[inf], weights=worn[inf], minlength=world.n_locations)
    sus = ((comp == C.S) | (comp == C.P)) & (n_inf[loc] > 0)
    idx = np.flatnonzero(sus)
    if idx.size == 0:
        return idx
    l = loc[idx]
    k = n_inf[l]
    b = cfg.beta * (1 - src[l] / k) * (1 - worn[idx]) * (1 - world.vacc_eff[idx])
    p = 1.0 - (1.0 - b) ** k
    hit = idx[rng.random(idx.size) < p]
    comp[hit] = C.E
    world.days_in_comp[hit] = 0
    world.ever_infected[hit] = True
    return hit


def progression_update(world: World, rng: np.random.Generator) -> None:
    """Advance disease states by one day with geometric dwell times."""
    cfg = world.config
    comp = world.comp
    n = comp.size
    leave_u = rng.random(n)
    branch_u = rng.random(n)
    old = comp.copy()
    new = comp.copy()

    def leaving(c, dwell):
        return (old == c) & (leave_u < 1.0 / dwell)

    m = leaving(C.E, cfg.dwell_exposed)
    new[m] = np.where(branch_u[m] < cfg.p_symptomatic, C.IM, C.A)
    m = leaving(C.A, cfg.dwell_asymptomatic)
    new[m] = C.R
    m = leaving(C.IM, cfg.dwell_mild)
    new[m] = np.where(branch_u[m] < cfg.p_severe, C.IS, C.R)
    m = leaving(C.H, cfg.dwell_hospital)
    new[m] = np.where(branch_u[m] < cfg.p_death, C.D, C.R)

    m = leaving(C.IS, cfg.dwell_severe) & (branch_u < cfg.p_hospital)
    cand = np.flatnonzero(m)
    capacity = int(cfg.hospital_capacity_frac * cfg.population)
    free = capacity - int(np.count_nonzero(new == C.H))
    if cand.size > free:
        # overflow stays severe
        cand = rng.permutation(cand)[:max(free, 0)]
    new[cand] = C.H

    changed = new != old
    world.days_in_comp += 1
    world.days_in_comp[changed] = 0
    comp[:] = new


@dataclass
class WeekPlan:
    """Interventions for one policy period."""

    lockdown: np.ndarray      # bool per tick of the period
    drive_days: np.ndarray    # bool [age group, day of period]
    action: np.ndarray


def clamp_action(action: Sequence[float]) -> tuple[np.ndarray, bool]:
    a = np.asarray(action, dtype=float)
    if a.shape != (N_ACTION,):
        raise ValueError(f"action must have {N_ACTION} components, got shape {a.shape}")
    a = np.nan_to_num(a, nan=0.0)
    clipped = np.clip(a, 0.0, MAX_DAYS)
    return clipped, bool(np.any(clipped != a))


def _window(start: float, duration: float, tpd: int, period: int) -> tuple[int, int]:
    lo = min(int(np.floor(start * tpd)), period)
    hi = min(int(np.floor((start + duration) * tpd)), period)
    return lo, max(lo, hi)


def apply_policy(world: World | None, action: Sequence[float], config: SimConfig | None = None) -> WeekPlan:
    """Turn an 8-component action (days) into tick-level interventions for a week."""
    cfg = config or world.config
    a, clipped = clamp_action(action)
    if clipped:
        log.warning("policy action outside [0, 7] clamped: %s", list(action))
        if world is not None:
            world.clamp_warnings += 1
    period, tpd = cfg.policy_period_ticks, cfg.ticks_per_day
    lockdown = np.zeros(period, dtype=bool)
    lo, hi = _window(a[0], a[1], tpd, period)
    lockdown[lo:hi] = True
    n_days = -(-period // tpd)
    drive = np.zeros((3, n_days), dtype=bool)
    for g in range(3):
        lo, hi = _window(a[2 + 2 * g], a[3 + 2 * g], tpd, period)
        if hi > lo:
            drive[g, lo // tpd:(hi - 1) // tpd + 1] = True
    return WeekPlan(lockdown, drive, a)


def vaccinate(world: World, active_groups: np.ndarray, rng: np.random.Generator) -> int:
    """Dispense one day of doses to susceptible agents in the active groups."""
    if not active_groups.any():
        return 0
    cfg = world.config
    eligible = np.flatnonzero(
        (world.comp == C.S) & (world.vaccine == 0) & world.consent & active_groups[world.group])
    if eligible.size == 0:
        return 0
    eligible = rng.permutation(eligible)
    n1 = min(cfg.vaccine_doses_per_day[0], eligible.size)
    n2 = min(cfg.vaccine_doses_per_day[1], eligible.size - n1)
    v1, v2 = eligible[:n1], eligible[n1:n1 + n2]
    for who, kind in ((v1, 1), (v2, 2)):
        world.vaccine[who] = kind
        world.vacc_eff[who] = cfg.vaccine_efficacy[kind - 1]
        world.comp[who] = C.P
        world.days_in_comp[who] = 0
    return n1 + n2


def economy_update(world: World, work_ticks: np.ndarray) -> None:
    """Daily household stock: wages for ticks worked minus consumption.

    ``work_ticks`` holds, per agent, the number of ticks spent at work today.
    """
    cfg = world.config
    paid = world.employed & (work_ticks > 0)
    income = np.bincount(
        world.household[paid],
        weights=cfg.wage * work_ticks[paid] / len(cfg.work_ticks),
        minlength=world.stock.size,
    )
    cons = world.consumption()
    world.stock = np.clip(world.stock + income - cons, 0.0, cfg.stock_cap_days * cons)


def observe(world: World) -> np.ndarray:
    """(infected-mild fraction, hospitalized fraction, below-poverty household fraction)."""
    n = world.comp.size
    return np.array([
        np.count_nonzero(world.comp == C.IM) / n,
        np.count_nonzero(world.comp == C.H) / n,
        np.count_nonzero(world.bpl()) / world.stock.size,
    ])


def reward(observation: Sequence[float], weights: Sequence[float] = (1.0, 1.0, 1.0)) -> float:
    """Weighted complement of the observation; in [0, sum(weights)]."""
    if min(weights) < 0:
        raise ValueError("reward weights must be non-negative")
    return float(sum(w * (1.0 - o) for w, o in zip(weights, observation)))


Policy = Callable[[np.ndarray], Sequence[float]]


@dataclass
class EpisodeResult:
    episode: Episode
    curve: np.ndarray          # (ticks, 9) compartment counts after each tick
    ever_infected: int
    clamp_warnings: int
    hospital_peak: int = 0
    extra: dict = field(default_factory=dict)


def simulate(config: SimConfig, policy: Policy, seed: int, run_name: str = "Run-1",
             kind: Kind = Kind.TRAIN) -> EpisodeResult:
    """Run one episode; ``policy`` may expose ``feedback(reward)``."""
    rng = np.random.default_rng(seed)
    world = build_world(config, seed=int(rng.integers(2**63)))
    cfg = config
    tpd, period = cfg.ticks_per_day, cfg.policy_period_ticks
    n_steps = cfg.n_policy_steps
    feedback = getattr(policy, "feedback", None)
    weights = np.asarray(cfg.reward_weights, dtype=float)
    weight_sum = float(weights.sum())

    curve = np.zeros((cfg.total_ticks, len(C)), dtype=np.int64)
    steps: list[Step] = []
    plan = apply_policy(None, np.zeros(N_ACTION), cfg)
    week_obs = None
    week_action = None
    week_rewards = 0.0
    work_ticks = np.zeros(cfg.population, dtype=np.int64)
    obs = observe(world)

    for tick in range(cfg.total_ticks):
        week, t_in_week = divmod(tick, period)
        if t_in_week == 0:
            if week < n_steps:
                week_obs = obs.copy()
                raw = policy(week_obs)
                plan = apply_policy(world, raw)
                week_action = plan.action
                week_rewards = 0.0
            else:
                # trailing partial period: no policy
                plan = apply_policy(None, np.zeros(N_ACTION), cfg)
        tod = tick % tpd
        world.lockdown = bool(plan.lockdown[t_in_week])
        if tod == 0:
            day_in_week = t_in_week // tpd
            vaccinate(world, plan.drive_days[:, day_in_week], rng)
            work_ticks[:] = 0

        loc = locations(world, tod, rng)
        if tod in cfg.work_ticks:
            work_ticks += (loc == world.work_loc) & world.employed
        transmission_update(world, loc, rng)
        if tod == tpd - 1:
            progression_update(world, rng)
            economy_update(world, work_ticks)

        curve[tick] = world.counts()
        obs = observe(world)
        week_rewards += weight_sum - float(weights @ obs)

        if t_in_week == period - 1 and week < n_steps:
            r = week_rewards / period
            steps.append(Step(
                tick=week * period,
                observation=tuple(float(x) for x in week_obs),
                action=tuple(float(x) for x in week_action),
                reward=r,
            ))
            if feedback is not None:
                feedback(r)

    episode = Episode(run_name, kind, tuple(steps))
    return EpisodeResult(
        episode=episode,
        curve=curve,
        ever_infected=int(world.ever_infected.sum()),
        clamp_warnings=world.clamp_warnings,
        hospital_peak=int(curve[:, C.H].max()) if curve.size else 0,
    )


def run_episode(config: SimConfig, policy: Policy, seed: int, run_name: str = "Run-1",
                kind: Kind = Kind.TRAIN) -> Episode:
    return simulate(config, policy, seed, run_name, kind).episode


CURVE_COLUMNS = ("tick",) + tuple(c.name for c in C)


def curve_rows(curve: np.ndarray) -> list[list[int]]:
    return [[t, *map(int, row)] for t, row in enumerate(curve)]
