"""Survey instrument and summary statistics.

Nine statements rated on a 1-5 Likert scale, summarized per statement and
session number by mode, median (even counts averaged), mean with a 95%
confidence interval, and a two-sided one-sample t-test against the neutral
midpoint 3.0.  The Student-t CDF is computed from the regularized
incomplete beta function (continued fraction), and critical values by
bisection, so there is no stats-library dependency to disagree with.

Display follows the compact survey-table convention: "3.9 ± .3" for the
interval (one decimal, leading zero dropped on the halfwidth) and p values
truncated to two decimals with the leading zero dropped (".00").
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from pathlib import Path


def load_statements(path: str | Path | None = None) -> dict[str, str]:
    p = Path(path) if path else Path(str(resources.files("bookchat").joinpath("data", "survey_statements.tsv")))
    statements: dict[str, str] = {}
    for line in p.read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        sid, text = line.split("\t")
        statements[sid] = text
    return statements


STATEMENTS = load_statements()
STATEMENT_IDS = tuple(STATEMENTS)
SESSIONS = (1, 2, 3)
NEUTRAL_MEAN = 3.0


@dataclass(frozen=True)
class SurveyResponse:
    session_id: str
    participant_id: str
    session_number: int
    ratings: dict[str, int]

    def __post_init__(self):
        if self.session_number not in SESSIONS:
            raise ValueError(f"session_number must be one of {SESSIONS}")
        missing = set(STATEMENT_IDS) - set(self.ratings)
        if missing:
            raise ValueError(f"ratings missing statements {sorted(missing)}")
        extra = set(self.ratings) - set(STATEMENT_IDS)
        if extra:
            raise ValueError(f"unknown statement ids {sorted(extra)}")
        for sid, value in self.ratings.items():
            if not isinstance(value, int) or isinstance(value, bool) or not 1 <= value <= 5:
                raise ValueError(f"rating {sid}={value!r} must be an integer in [1, 5]")


@dataclass(frozen=True)
class SurveyStats:
    statement_id: str
    session_number: int
    n: int
    mode: float
    median: float
    mean: float
    ci95_halfwidth: float | None
    t: float | None
    p: float | None
    degenerate: bool


# ---------------------------------------------------------------------------
# Elementary statistics

def mode(values: list[int]) -> float:
    """Most frequent value; frequency ties resolve to the smallest value."""
    if not values:
        raise ValueError("mode of empty sample")
    counts = Counter(values)
    top = max(counts.values())
    return float(min(v for v, c in counts.items() if c == top))


def median_tie_avg(values) -> float:
    """Middle of the sorted sample; even counts average the two middles."""
    if not values:
        raise ValueError("median of empty sample")
    ordered = sorted(values)
    n = len(ordered)
    mid = n // 2
    if n % 2:
        return float(ordered[mid])
    return (ordered[mid - 1] + ordered[mid]) / 2.0


def sample_std(values) -> float:
    n = len(values)
    if n < 2:
        raise ValueError("sample std needs n >= 2")
    m = sum(values) / n
    return math.sqrt(sum((v - m) ** 2 for v in values) / (n - 1))


# ---------------------------------------------------------------------------
# Student t distribution

def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (Lentz)."""
    MAXIT, EPS, FPMIN = 300, 1e-15, 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < FPMIN:
        d = FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < FPMIN:
            d = FPMIN
        c = 1.0 + aa / c
        if abs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < FPMIN:
            d = FPMIN
        c = 1.0 + aa / c
        if abs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < EPS:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def _reg_inc_beta(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_bt = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log(1.0 - x)
    bt = math.exp(ln_bt)
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _betacf(a, b, x) / a
    return 1.0 - bt * _betacf(b, a, 1.0 - x) / b


def t_cdf(t: float, df: int) -> float:
    """Student-t CDF via the regularized incomplete beta function."""
    if df < 1:
        raise ValueError("df must be >= 1")
    if t == 0.0:
        return 0.5
    if math.isinf(t):
        return 1.0 if t > 0 else 0.0
    x = df / (df + t * t)
    tail = 0.5 * _reg_inc_beta(df / 2.0, 0.5, x)
    return 1.0 - tail if t > 0 else tail


def t_crit(q: float, df: int, tol: float = 1e-9) -> float:
    """Inverse CDF by bisection: the t with t_cdf(t, df) = q, for q in (0.5, 1)."""
    if not 0.5 < q < 1.0:
        raise ValueError("t_crit expects an upper-tail quantile in (0.5, 1)")
    lo, hi = 0.0, 2.0
    while t_cdf(hi, df) < q:
        hi *= 2.0
        if hi > 1e12:
            raise ArithmeticError("t_crit bracket blew up")
    while hi - lo > tol:
        mid = (lo + hi) / 2.0
        if t_cdf(mid, df) < q:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2.0


def one_sample_t(values, mu0: float = NEUTRAL_MEAN) -> tuple[float, float, bool]:
    """Two-sided one-sample t-test: (t, p, degenerate).

    Zero-variance samples are flagged degenerate: t=0, p=1 when the mean
    equals mu0; otherwise t=+/-inf with p=0.
    """
    n = len(values)
    if n < 2:
        raise ValueError("one_sample_t needs n >= 2")
    m = sum(values) / n
    s = sample_std(values)
    if s == 0.0:
        if m == mu0:
            return 0.0, 1.0, True
        return math.copysign(math.inf, m - mu0), 0.0, True
    t = (m - mu0) / (s / math.sqrt(n))
    p = 2.0 * (1.0 - t_cdf(abs(t), n - 1))
    return t, min(1.0, max(0.0, p)), False


def mean_ci95(values) -> tuple[float, float]:
    """Sample mean and the halfwidth of its 95% confidence interval."""
    n = len(values)
    if n < 2:
        raise ValueError("mean_ci95 needs n >= 2")
    m = sum(values) / n
    halfwidth = t_crit(0.975, n - 1) * sample_std(values) / math.sqrt(n)
    return m, halfwidth


# ---------------------------------------------------------------------------
# Survey summarization

def summarize_survey(responses: list[SurveyResponse]) -> list[SurveyStats]:
    """One row per (statement, session) present in the responses, ordered by
    statement then session."""
    groups: dict[tuple[str, int], list[int]] = {}
    for resp in responses:
        for sid, value in resp.ratings.items():
            groups.setdefault((sid, resp.session_number), []).append(value)
    out = []
    for sid in STATEMENT_IDS:
        for session in SESSIONS:
            values = groups.get((sid, session))
            if not values:
                continue
            n = len(values)
            m = sum(values) / n
            if n >= 2:
                _, halfwidth = mean_ci95(values)
                t, p, degenerate = one_sample_t(values)
            else:
                halfwidth, t, p, degenerate = None, None, None, True
            out.append(SurveyStats(
                statement_id=sid,
                session_number=session,
                n=n,
                mode=mode(values),
                median=median_tie_avg(values),
                mean=m,
                ci95_halfwidth=halfwidth,
                t=t,
                p=p,
                degenerate=degenerate,
            ))
    return out


# ---------------------------------------------------------------------------
# Rendering

def _fmt_number(x: float, decimals: int = 1) -> str:
    return f"{x:.{decimals}f}"


def _strip_leading_zero(s: str) -> str:
    if s.startswith("0."):
        return s[1:]
    if s.startswith("-0."):
        return "-" + s[2:]
    return s


def format_ci(mean: float, halfwidth: float) -> str:
    """Survey-table interval style: one decimal, bare halfwidth ("3.9 ± .3")."""
    return f"{_fmt_number(mean)} ± {_strip_leading_zero(_fmt_number(halfwidth))}"


def format_p(p: float) -> str:
    """Truncated to two decimals, leading zero dropped (".00"); full
    precision lives in the structured output."""
    truncated = math.floor(p * 100.0) / 100.0
    return _strip_leading_zero(f"{truncated:.2f}")


def _cell(stats: SurveyStats | None, column: str) -> str:
    if stats is None:
        return "-"
    if column == "mode":
        return f"{stats.mode:g}"
    if column == "median":
        return _fmt_number(stats.median)
    if column == "ci":
        if stats.ci95_halfwidth is None:
            return "-"
        return format_ci(stats.mean, stats.ci95_halfwidth)
    if column == "p":
        if stats.p is None:
            return "-"
        if stats.degenerate and math.isinf(stats.t or 0.0):
            return ".00"
        return format_p(stats.p)
    raise ValueError(column)


_COLUMN_GROUPS = (("Mode", "mode"), ("Median", "median"), ("95% C.I.", "ci"), ("p", "p"))


def render_table(stats: list[SurveyStats]) -> str:
    """Aligned text table: statements as rows; mode/median/CI/p column
    groups, one column per session within each group."""
    lookup = {(s.statement_id, s.session_number): s for s in stats}
    sessions = sorted({s.session_number for s in stats}) or list(SESSIONS)
    rows = []
    for sid in STATEMENT_IDS:
        if not any((sid, sess) in lookup for sess in sessions):
            continue
        row = [f"{sid}: {STATEMENTS[sid]}"]
        for _, column in _COLUMN_GROUPS:
            for sess in sessions:
                row.append(_cell(lookup.get((sid, sess)), column))
        rows.append(row)
    header = ["Statement"]
    for title, _ in _COLUMN_GROUPS:
        for sess in sessions:
            header.append(f"{title} {sess}")
    widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
             for row in [header, *rows]]
    return "\n".join(lines) + "\n"


def render_tsv(stats: list[SurveyStats]) -> str:
    """Machine-readable summary, full precision."""
    cols = ["statement_id", "session", "n", "mode", "median", "mean",
            "ci95_halfwidth", "t", "p", "degenerate", "ci_display", "p_display"]
    lines = ["\t".join(cols)]
    for s in stats:
        t_text = "" if s.t is None else ("inf" if math.isinf(s.t) else ("-inf" if s.t == -math.inf else repr(s.t)))
        lines.append("\t".join([
            s.statement_id,
            str(s.session_number),
            str(s.n),
            repr(s.mode),
            repr(s.median),
            repr(s.mean),
            "" if s.ci95_halfwidth is None else repr(s.ci95_halfwidth),
            t_text,
            "" if s.p is None else repr(s.p),
            "1" if s.degenerate else "0",
            _cell(s, "ci"),
            _cell(s, "p"),
        ]))
    return "\n".join(lines) + "\n"


def stats_to_dicts(stats: list[SurveyStats]) -> list[dict]:
    out = []
    for s in stats:
        t_val = None if s.t is None or math.isinf(s.t) else s.t
        out.append({
            "statement_id": s.statement_id,
            "statement": STATEMENTS[s.statement_id],
            "session": s.session_number,
            "n": s.n,
            "mode": s.mode,
            "median": s.median,
            "mean": s.mean,
            "ci95_halfwidth": s.ci95_halfwidth,
            "t": t_val,
            "p": s.p,
            "degenerate": s.degenerate,
            "ci_display": _cell(s, "ci"),
            "p_display": _cell(s, "p"),
        })
    return out


# ---------------------------------------------------------------------------
# Response files (JSON lines)

def response_to_dict(resp: SurveyResponse) -> dict:
    return {
        "session_id": resp.session_id,
        "participant_id": resp.participant_id,
        "session_number": resp.session_number,
        "ratings": dict(resp.ratings),
    }


def response_from_dict(data: dict) -> SurveyResponse:
    return SurveyResponse(
        session_id=data["session_id"],
        participant_id=data["participant_id"],
        session_number=data["session_number"],
        ratings={k: int(v) for k, v in data["ratings"].items()},
    )


def read_responses(path: str | Path) -> list[SurveyResponse]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            out.append(response_from_dict(json.loads(line)))
    return out


def write_responses(path: str | Path, responses: list[SurveyResponse]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for resp in responses:
            fh.write(json.dumps(response_to_dict(resp), ensure_ascii=False) + "\n")


# ---------------------------------------------------------------------------
# Figures

def render_figures(stats: list[SurveyStats], out_dir: str | Path, prefix: str = "survey_summary") -> list[Path]:
    """Mean +/- CI per statement, one series per session, plus the neutral
    line; written as a PNG next to the delimited output."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sessions = sorted({s.session_number for s in stats})
    sids = [sid for sid in STATEMENT_IDS if any(s.statement_id == sid for s in stats)]
    lookup = {(s.statement_id, s.session_number): s for s in stats}

    fig, ax = plt.subplots(figsize=(9, 4.5))
    x = list(range(len(sids)))
    width = 0.8 / max(len(sessions), 1)
    for k, sess in enumerate(sessions):
        offs = [xi + (k - (len(sessions) - 1) / 2) * width for xi in x]
        means = [lookup[(sid, sess)].mean if (sid, sess) in lookup else math.nan for sid in sids]
        halfs = [
            (lookup[(sid, sess)].ci95_halfwidth or 0.0) if (sid, sess) in lookup else 0.0
            for sid in sids
        ]
        ax.errorbar(offs, means, yerr=halfs, fmt="o", capsize=3, label=f"Session {sess}")
    ax.axhline(NEUTRAL_MEAN, color="grey", linewidth=0.8, linestyle="--")
    ax.set_xticks(x)
    ax.set_xticklabels(sids)
    ax.set_ylim(0.5, 5.5)
    ax.set_ylabel("Rating (1-5)")
    ax.set_title("Survey ratings: mean with 95% CI")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    path = out_dir / f"{prefix}.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return [path]
