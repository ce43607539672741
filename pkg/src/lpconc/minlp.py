"""Solver-neutral export of the SAA mixed-integer model.

The exported document is a line-oriented text file::

    MODEL lpconc-saa 1
    PARAM <key> <value>            # S, T, alpha bounds, costs, big_m, ...
    OBJ max <terms> | <constant>
    VAR <name> <lo> <hi>
    BIN <name>
    CON <name>: <terms> <sense> <rhs>
    END

``<terms>`` is a whitespace-separated list of ``<coef> <var>`` or
``<coef> <var>*<var>`` pairs. Product terms only appear in the explicit
definitions of auxiliary variables (``alpha*ainv = 1``, ``L*il``, ...), so
the model is a mixed-integer program with bilinear equalities. All logical
implications and binary-continuous products are encoded with a single
Big-M constant. Numbers are written with ``repr`` and round-trip exactly.

Per scenario ``s`` (0-based) and step ``t`` the template is

* state ``t = 0..T-1``: ``pl pu il iu L Lil Liu Lpl Lpu plsq pusq``
  (interval bounds, their reciprocals, liquidity and its products)
* step ``t = 1..T``: binaries ``zl zm zu z``; continuous ``xw yw cf fl sf``
  (withdrawn reserves, earned fee rate, fee income, unclaimed fees)
* rebalance ``t = 1..T-1``: ``xr yr vol q`` (new holdings, traded volume,
  ``amult * yr``)

plus three shared variables ``alpha``, ``ainv = 1/alpha`` and
``amult = alpha/(alpha-1)``. That gives ``20 T - 4`` continuous variables
and ``4 T`` binaries per scenario, and ``64 T - 29`` constraints per
scenario plus two shared definitions.

No reallocation is modelled at the horizon ``T``: the objective is the
mean of ``P_T xw_T + yw_T + sf_T``. Ruin (wealth exhausted by costs) is
not representable; such scenarios make the model infeasible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .engine import Side, StrategyParams, StrategyRun
from .errors import InvalidData, InvalidParameter

Term = tuple[float, tuple[str, ...]]

_SENSES = ("<=", "=", ">=")


@dataclass(frozen=True)
class Variable:
    name: str
    lo: float
    hi: float


@dataclass(frozen=True)
class Constraint:
    name: str
    terms: tuple[Term, ...]
    sense: str
    rhs: float


def _fmt(x: float) -> str:
    return repr(float(x))


def _fmt_terms(terms: Iterable[Term]) -> str:
    return " ".join(f"{_fmt(c)} {'*'.join(v)}" for c, v in terms)


def _parse_terms(tokens: Sequence[str]) -> tuple[Term, ...]:
    if len(tokens) % 2:
        raise InvalidData(f"malformed term list: {' '.join(tokens)!r}")
    return tuple((float(tokens[i]), tuple(tokens[i + 1].split("*"))) for i in range(0, len(tokens), 2))


@dataclass
class ModelDocument:
    params: dict[str, str] = field(default_factory=dict)
    objective: tuple[Term, ...] = ()
    objective_constant: float = 0.0
    variables: list[Variable] = field(default_factory=list)
    binaries: list[str] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)

    def to_text(self) -> str:
        lines = ["MODEL lpconc-saa 1"]
        lines += [f"PARAM {k} {v}" for k, v in self.params.items()]
        lines.append(f"OBJ max {_fmt_terms(self.objective)} | {_fmt(self.objective_constant)}")
        lines += [f"VAR {v.name} {_fmt(v.lo)} {_fmt(v.hi)}" for v in self.variables]
        lines += [f"BIN {b}" for b in self.binaries]
        lines += [f"CON {c.name}: {_fmt_terms(c.terms)} {c.sense} {_fmt(c.rhs)}" for c in self.constraints]
        lines.append("END")
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> ModelDocument:
        doc = cls()
        lines = text.splitlines()
        if not lines or lines[0].strip() != "MODEL lpconc-saa 1":
            raise InvalidData("not an lpconc model document")
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            kind, _, rest = line.partition(" ")
            if kind == "PARAM":
                key, _, value = rest.partition(" ")
                doc.params[key] = value
            elif kind == "OBJ":
                body = rest.split()
                if body[0] != "max" or "|" not in body:
                    raise InvalidData(f"line {lineno}: malformed objective")
                bar = body.index("|")
                doc.objective = _parse_terms(body[1:bar])
                doc.objective_constant = float(body[bar + 1])
            elif kind == "VAR":
                name, lo, hi = rest.split()
                doc.variables.append(Variable(name, float(lo), float(hi)))
            elif kind == "BIN":
                doc.binaries.append(rest.strip())
            elif kind == "CON":
                name, _, body = rest.partition(": ")
                tokens = body.split()
                if len(tokens) < 2 or tokens[-2] not in _SENSES:
                    raise InvalidData(f"line {lineno}: malformed constraint")
                doc.constraints.append(Constraint(name, _parse_terms(tokens[:-2]), tokens[-2], float(tokens[-1])))
            elif kind == "END":
                break
            else:
                raise InvalidData(f"line {lineno}: unknown record {kind!r}")
        return doc

    def evaluate(self, assignment: dict[str, float]) -> list[tuple[str, float]]:
        """Scaled violations ``(name, v)`` with ``v > 0`` for every broken row.

        Violations are divided by ``1 + sum |term| + |rhs|`` so the result
        is comparable to a relative tolerance. Bounds and integrality are
        reported under ``bound:<var>`` and ``binary:<var>``.
        """
        out = []
        for v in self.variables:
            val = assignment[v.name]
            excess = max(v.lo - val, val - v.hi, 0.0)
            if excess > 0.0:
                out.append((f"bound:{v.name}", excess / (1.0 + abs(val))))
        for b in self.binaries:
            val = assignment[b]
            if val not in (0.0, 1.0):
                out.append((f"binary:{b}", min(abs(val), abs(val - 1.0))))
        for con in self.constraints:
            lhs = 0.0
            scale = 1.0 + abs(con.rhs)
            for coef, names in con.terms:
                term = coef * math.prod(assignment[n] for n in names)
                lhs += term
                scale += abs(term)
            diff = lhs - con.rhs
            viol = {"<=": max(diff, 0.0), ">=": max(-diff, 0.0), "=": abs(diff)}[con.sense]
            if viol > 0.0:
                out.append((con.name, viol / scale))
        return out

    def objective_value(self, assignment: dict[str, float]) -> float:
        return self.objective_constant + sum(
            coef * math.prod(assignment[n] for n in names) for coef, names in self.objective
        )


def _v(name: str, s: int, t: int) -> str:
    return f"{name}[{s},{t}]"


@dataclass
class _Bounds:
    """Per-scenario magnitude bounds used for variable boxes and Big-M."""

    pl: tuple[float, float]
    pu: tuple[float, float]
    il: tuple[float, float]
    iu: tuple[float, float]
    liq: float
    wealth: float
    x_max: float


def _scenario_bounds(
    path: np.ndarray, fee_rates: np.ndarray, low: float, high: float, initial_wealth: float
) -> _Bounds:
    pmin, pmax = float(path.min()), float(path.max())
    marg = path * path
    growth = float(np.prod(np.maximum(1.0, marg[1:] / marg[:-1])))
    amult_max = low / (low - 1.0)
    fee_growth = float(np.prod(1.0 + fee_rates * amult_max / pmin))
    wealth = initial_wealth * growth * fee_growth
    return _Bounds(
        pl=(pmin / high, pmax / low),
        pu=(pmin * low, pmax * high),
        il=(low / pmax, high / pmin),
        iu=(1.0 / (high * pmax), 1.0 / (low * pmin)),
        liq=amult_max * wealth / pmin,
        wealth=wealth,
        x_max=wealth / (pmin * pmin),
    )


class _Builder:
    def __init__(self, big_m: float) -> None:
        self.big_m = big_m
        self.doc = ModelDocument()
        self.big_m_rows: set[int] = set()

    def var(self, name: str, lo: float, hi: float) -> str:
        self.doc.variables.append(Variable(name, lo, hi))
        return name

    def binary(self, name: str) -> str:
        self.doc.binaries.append(name)
        return name

    def con(self, name: str, terms: list[tuple[float, str | tuple[str, ...]]], sense: str, rhs: float, big_m=False):
        norm = tuple((float(c), (v,) if isinstance(v, str) else tuple(v)) for c, v in terms if c != 0.0 or big_m)
        if big_m:
            self.big_m_rows.add(len(self.doc.constraints))
        self.doc.constraints.append(Constraint(name, norm, sense, float(rhs)))

    def when(self, name: str, terms, rhs: float, binary: str, active: int = 1) -> None:
        """``expr = rhs`` whenever ``binary == active`` (two Big-M rows)."""
        m = self.big_m
        for sign, suffix in ((1.0, "le"), (-1.0, "ge")):
            scaled = [(sign * c, v) for c, v in terms]
            if active == 1:
                # sign*(expr - rhs) <= M (1 - z)
                self.con(f"{name}:{suffix}", scaled + [(m, binary)], "<=", sign * rhs + m, big_m=True)
            else:
                # sign*(expr - rhs) <= M z
                self.con(f"{name}:{suffix}", scaled + [(-m, binary)], "<=", sign * rhs, big_m=True)


def _build(
    paths: np.ndarray,
    fee_rates: np.ndarray,
    low: float,
    high: float,
    params: StrategyParams,
    initial_wealth: float,
    big_m: float,
    strict_eps: float,
) -> _Builder:
    n_paths, n_points = paths.shape
    horizon = n_points - 1
    gamma, c_tr, c_g = params.gamma, params.trade_fee, params.gas_cost
    b = _Builder(big_m)
    m = big_m

    b.var("alpha", low, high)
    b.var("ainv", 1.0 / high, 1.0 / low)
    b.var("amult", high / (high - 1.0), low / (low - 1.0))
    b.con("def_ainv", [(1.0, ("alpha", "ainv"))], "=", 1.0)
    b.con("def_amult", [(1.0, ("amult", "alpha")), (-1.0, "amult"), (-1.0, "alpha")], "=", 0.0)

    objective: list[Term] = []
    for s in range(n_paths):
        pi = paths[s]
        marg = pi * pi
        bd = _scenario_bounds(pi, fee_rates, low, high, initial_wealth)
        lmax = bd.liq
        V = lambda name, t: _v(name, s, t)  # noqa: E731

        for t in range(horizon):
            b.var(V("pl", t), *bd.pl)
            b.var(V("pu", t), *bd.pu)
            b.var(V("il", t), *bd.il)
            b.var(V("iu", t), *bd.iu)
            b.var(V("L", t), 0.0, lmax)
            b.var(V("Lil", t), 0.0, lmax * bd.il[1])
            b.var(V("Liu", t), 0.0, lmax * bd.iu[1])
            b.var(V("Lpl", t), 0.0, lmax * bd.pl[1])
            b.var(V("Lpu", t), 0.0, lmax * bd.pu[1])
            b.var(V("plsq", t), bd.pl[0] ** 2, bd.pl[1] ** 2)
            b.var(V("pusq", t), bd.pu[0] ** 2, bd.pu[1] ** 2)
        for t in range(1, horizon + 1):
            for z in ("zl", "zm", "zu", "z"):
                b.binary(V(z, t))
            b.var(V("xw", t), 0.0, bd.x_max)
            b.var(V("yw", t), 0.0, bd.wealth)
            b.var(V("cf", t), 0.0, float(fee_rates[t - 1]))
            b.var(V("fl", t), 0.0, float(fee_rates[t - 1]) * lmax)
            b.var(V("sf", t), 0.0, bd.wealth)
        for t in range(1, horizon):
            b.var(V("xr", t), 0.0, bd.x_max)
            b.var(V("yr", t), 0.0, bd.wealth)
            b.var(V("vol", t), 0.0, bd.wealth)
            b.var(V("q", t), 0.0, (low / (low - 1.0)) * bd.wealth)

        # opening position
        p0 = float(pi[0])
        b.con(f"init_pl[{s}]", [(1.0, V("pl", 0)), (-p0, "ainv")], "=", 0.0)
        b.con(f"init_pu[{s}]", [(1.0, V("pu", 0)), (-p0, "alpha")], "=", 0.0)
        b.con(f"init_il[{s}]", [(1.0, V("il", 0)), (-1.0 / p0, "alpha")], "=", 0.0)
        b.con(f"init_iu[{s}]", [(1.0, V("iu", 0)), (-1.0 / p0, "ainv")], "=", 0.0)
        b.con(f"init_L[{s}]", [(1.0, V("L", 0)), (-0.5 * initial_wealth / p0, "amult")], "=", 0.0)

        def products(t: int) -> None:
            L = V("L", t)
            for aux, other in (("Lil", "il"), ("Liu", "iu"), ("Lpl", "pl"), ("Lpu", "pu")):
                b.con(f"def_{aux}[{s},{t}]", [(1.0, V(aux, t)), (-1.0, (L, V(other, t)))], "=", 0.0)
            b.con(f"def_plsq[{s},{t}]", [(1.0, V("plsq", t)), (-1.0, (V("pl", t), V("pl", t)))], "=", 0.0)
            b.con(f"def_pusq[{s},{t}]", [(1.0, V("pusq", t)), (-1.0, (V("pu", t), V("pu", t)))], "=", 0.0)

        products(0)
        for t in range(1, horizon + 1):
            tag = f"[{s},{t}]"
            pt, pp = float(pi[t]), float(pi[t - 1])
            Pt, Pp = float(marg[t]), float(marg[t - 1])
            cbar = float(fee_rates[t - 1])
            zl, zm, zu, z = V("zl", t), V("zm", t), V("zu", t), V("z", t)
            pl0, pu0 = V("pl", t - 1), V("pu", t - 1)
            L0 = V("L", t - 1)

            # trigger logic
            b.con(f"trigger_lower_on{tag}", [(1.0, pl0), (-m, zl)], "<=", pt + gamma - strict_eps, big_m=True)
            b.con(f"trigger_lower_off{tag}", [(-1.0, pl0), (m, zl)], "<=", m - pt - gamma, big_m=True)
            b.con(f"trigger_upper_on{tag}", [(-1.0, pu0), (-m, zu)], "<=", -pt + gamma - strict_eps, big_m=True)
            b.con(f"trigger_upper_off{tag}", [(1.0, pu0), (m, zu)], "<=", m + pt - gamma, big_m=True)
            b.con(f"trigger_mid{tag}", [(1.0, zl), (1.0, zm), (1.0, zu)], "=", 1.0)
            b.con(f"trigger_any{tag}", [(1.0, z), (-1.0, zl), (-1.0, zu)], "=", 0.0)

            # withdrawn reserves at the current price
            xw, yw = V("xw", t), V("yw", t)
            b.when(f"withdraw_x_below{tag}", [(1.0, xw), (-1.0, V("Lil", t - 1)), (1.0, V("Liu", t - 1))], 0.0, zl)
            b.when(f"withdraw_x_mid{tag}", [(1.0, xw), (-1.0 / pt, L0), (1.0, V("Liu", t - 1))], 0.0, zm)
            b.con(f"withdraw_x_above{tag}", [(1.0, xw), (m, zu)], "<=", m, big_m=True)
            b.when(f"withdraw_y_mid{tag}", [(1.0, yw), (-pt, L0), (1.0, V("Lpl", t - 1))], 0.0, zm)
            b.when(f"withdraw_y_above{tag}", [(1.0, yw), (-1.0, V("Lpu", t - 1)), (1.0, V("Lpl", t - 1))], 0.0, zu)
            b.con(f"withdraw_y_below{tag}", [(1.0, yw), (m, zl)], "<=", m, big_m=True)

            # earned fee rate: linear interpolation of the marginal price
            cf, fl, sf = V("cf", t), V("fl", t), V("sf", t)
            b.when(f"fee_rate_mid{tag}", [(1.0, cf)], cbar, zm)
            b.when(f"fee_rate_below{tag}", [(Pp - Pt, cf), (cbar, V("plsq", t - 1))], cbar * Pp, zl)
            b.when(f"fee_rate_above{tag}", [(Pt - Pp, cf), (-cbar, V("pusq", t - 1))], -cbar * Pp, zu)
            b.con(f"def_fl{tag}", [(1.0, fl), (-1.0, (cf, L0))], "=", 0.0)

            # unclaimed fees, reset after a reallocation
            if t == 1:
                b.con(f"fee_accumulation{tag}", [(1.0, sf), (-1.0, fl)], "=", 0.0)
            else:
                zprev, sprev = V("z", t - 1), V("sf", t - 1)
                b.when(f"fee_accumulation_keep{tag}", [(1.0, sf), (-1.0, sprev), (-1.0, fl)], 0.0, zprev, active=0)
                b.when(f"fee_accumulation_reset{tag}", [(1.0, sf), (-1.0, fl)], 0.0, zprev)

            if t == horizon:
                objective += [(Pt / n_paths, (xw,)), (1.0 / n_paths, (yw,)), (1.0 / n_paths, (sf,))]
                continue

            # interval update
            for name, expr_new in (
                ("pl", [(-pt, "ainv")]),
                ("pu", [(-pt, "alpha")]),
                ("il", [(-1.0 / pt, "alpha")]),
                ("iu", [(-1.0 / pt, "ainv")]),
            ):
                cur, prev = V(name, t), V(name, t - 1)
                b.when(f"interval_{name}_move{tag}", [(1.0, cur)] + expr_new, 0.0, z)
                b.when(f"interval_{name}_keep{tag}", [(1.0, cur), (-1.0, prev)], 0.0, z, active=0)

            # rebalance
            xr, yr, vol, q = V("xr", t), V("yr", t), V("vol", t), V("q", t)
            b.con(f"volume_up{tag}", [(1.0, yr), (-1.0, yw), (-1.0, vol)], "<=", 0.0)
            b.con(f"volume_down{tag}", [(-1.0, yr), (1.0, yw), (-1.0, vol)], "<=", 0.0)
            b.when(
                f"rebalance_value{tag}",
                [(Pt, xr), (1.0, yr), (-Pt, xw), (-1.0, yw), (c_tr, vol), (-1.0, sf)],
                -c_g,
                z,
            )
            b.when(f"rebalance_balance{tag}", [(1.0, yr), (-Pt, xr)], 0.0, z)
            b.when(f"carry_x{tag}", [(1.0, xr), (-1.0, xw)], 0.0, z, active=0)
            b.when(f"carry_y{tag}", [(1.0, yr), (-1.0, yw)], 0.0, z, active=0)

            # liquidity
            b.con(f"def_q{tag}", [(1.0, q), (-1.0, ("amult", yr))], "=", 0.0)
            b.when(f"liquidity_move{tag}", [(pt, V("L", t)), (-1.0, q)], 0.0, z)
            b.when(f"liquidity_keep{tag}", [(1.0, V("L", t)), (-1.0, L0)], 0.0, z, active=0)
            products(t)

    b.doc.objective = tuple(objective)
    return b


def _required_big_m(builder: _Builder) -> float:
    """Largest magnitude any Big-M row must absorb when its indicator is off."""
    bounds = {v.name: max(abs(v.lo), abs(v.hi)) for v in builder.doc.variables}
    bounds.update({name: 1.0 for name in builder.doc.binaries})
    need = 0.0
    for i in builder.big_m_rows:
        con = builder.doc.constraints[i]
        size = abs(con.rhs)
        for coef, names in con.terms:
            size += abs(coef) * math.prod(bounds[n] for n in names)
        need = max(need, size)
    return need


def _normalize_inputs(paths, fee_rate) -> tuple[np.ndarray, np.ndarray]:
    arr = np.atleast_2d(np.asarray(paths, dtype=float))
    if arr.shape[1] < 2 or not np.all(arr > 0.0):
        raise InvalidParameter("paths must be positive with at least two points")
    horizon = arr.shape[1] - 1
    rates = np.asarray(fee_rate, dtype=float)
    rates = np.full(horizon, float(rates)) if rates.ndim == 0 else rates
    if rates.shape != (horizon,):
        raise InvalidParameter(f"fee rate series must have {horizon} entries")
    return arr, rates


def required_big_m(paths, fee_rate, alpha_bounds, params: StrategyParams, initial_wealth: float) -> float:
    """Smallest Big-M constant for which the exported model is exact."""
    arr, rates = _normalize_inputs(paths, fee_rate)
    low, high = alpha_bounds
    return _required_big_m(_build(arr, rates, low, high, params, initial_wealth, 0.0, 0.0))


def export_minlp(
    paths,
    fee_rate,
    alpha_bounds: tuple[float, float],
    params: StrategyParams,
    initial_wealth: float,
    big_m: float | None = None,
    *,
    strict_eps: float = 1e-9,
    seed: int | None = None,
) -> ModelDocument:
    """Build the Big-M model for the SAA problem over ``paths``.

    ``params.alpha`` is ignored (``alpha`` is the decision variable).
    ``big_m`` defaults to four times the required magnitude; a smaller
    value than required raises :class:`InvalidParameter`.
    """
    arr, rates = _normalize_inputs(paths, fee_rate)
    low, high = alpha_bounds
    if not 1.0 < low < high:
        raise InvalidParameter(f"alpha bounds must satisfy 1 < low < high, got {alpha_bounds}")
    need = required_big_m(arr, rates, alpha_bounds, params, initial_wealth)
    if big_m is None:
        big_m = 4.0 * need
    elif big_m < need:
        raise InvalidParameter(f"big_m={big_m:.6g} is below the required {need:.6g} for these paths")
    builder = _build(arr, rates, low, high, params, initial_wealth, float(big_m), strict_eps)
    doc = builder.doc
    doc.params = {
        "S": str(arr.shape[0]),
        "T": str(arr.shape[1] - 1),
        "alpha_low": _fmt(low),
        "alpha_high": _fmt(high),
        "gamma": _fmt(params.gamma),
        "gas_cost": _fmt(params.gas_cost),
        "trade_fee": _fmt(params.trade_fee),
        "initial_wealth": _fmt(initial_wealth),
        "big_m": _fmt(big_m),
        "strict_eps": _fmt(strict_eps),
    }
    if seed is not None:
        doc.params["seed"] = str(int(seed))
    return doc


def engine_assignment(
    runs: Sequence[StrategyRun], paths, params: StrategyParams
) -> dict[str, float]:
    """Map engine trajectories (one per scenario) onto the model's variables.

    Useful to certify that a simulated policy is feasible for the exported
    model and that the model objective reproduces the simulated mean.
    """
    arr = np.atleast_2d(np.asarray(paths, dtype=float))
    alpha = params.alpha
    out: dict[str, float] = {"alpha": alpha, "ainv": 1.0 / alpha, "amult": alpha / (alpha - 1.0)}
    for s, run in enumerate(runs):
        if run.ruin_step is not None:
            raise InvalidParameter(f"scenario {s} is ruined and has no model counterpart")
        states = [run.initial_state] + [st for st, _ in run.trajectory]
        horizon = len(run.trajectory)
        for t in range(horizon):
            st = states[t]
            lo, hi, L = st.position.interval.lower, st.position.interval.upper, st.position.liquidity
            vals = {
                "pl": lo, "pu": hi, "il": 1.0 / lo, "iu": 1.0 / hi, "L": L,
                "Lil": L / lo, "Liu": L / hi, "Lpl": L * lo, "Lpu": L * hi,
                "plsq": lo * lo, "pusq": hi * hi,
            }
            out.update({_v(k, s, t): v for k, v in vals.items()})
        for t in range(1, horizon + 1):
            st, ev = run.trajectory[t - 1]
            out[_v("zl", s, t)] = float(ev.side is Side.BELOW)
            out[_v("zu", s, t)] = float(ev.side is Side.ABOVE)
            out[_v("zm", s, t)] = float(ev.side is Side.INSIDE)
            out[_v("z", s, t)] = float(ev.side is not Side.INSIDE)
            out[_v("xw", s, t)] = ev.withdrawn.x
            out[_v("yw", s, t)] = ev.withdrawn.y
            out[_v("cf", s, t)] = ev.fee_rate_earned
            out[_v("fl", s, t)] = ev.fees_accrued
            out[_v("sf", s, t)] = st.unclaimed_fees
            if t < horizon:
                out[_v("xr", s, t)] = st.holdings.x
                out[_v("yr", s, t)] = st.holdings.y
                out[_v("vol", s, t)] = abs(st.holdings.y - ev.withdrawn.y)
                out[_v("q", s, t)] = out["amult"] * st.holdings.y
    return out
