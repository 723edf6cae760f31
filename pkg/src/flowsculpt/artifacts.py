"""Run artifacts: every metric stream a training run produces.

On disk a run is a directory of delimited text plus JSON documents:

  config.json         fully resolved configuration (byte-stable)
  episodes.csv        episode,reward,length,success,pmr,sequence
  windows.csv         window,start_episode,end_episode,episodes,successes,frequency
  unique_states.csv   episode,unique_states
  solutions.csv       rank,frequency,sequence
  summary.json        counters, totals, checkpoint reference
  checkpoint.json     final agent checkpoint

`sequence` columns are space-separated action ids.  Floats are written with
repr so identical runs produce identical bytes; these tables are the plotting
interface.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import DocumentError, UsageError
from .formats import canonical_json, read_json

SUMMARY_FORMAT = "flowsculpt.run"


@dataclass(frozen=True)
class EpisodeLog:
    episode: int
    reward: float
    length: int
    success: bool
    pmr: float
    sequence: tuple[int, ...]


@dataclass(frozen=True)
class WindowStat:
    window: int
    start_episode: int
    end_episode: int  # exclusive
    episodes: int
    successes: int
    frequency: float


class SolutionTable:
    """Frequencies of successful action sequences, ranked by visits.

    Ties keep first-seen order.
    """

    def __init__(self):
        self._counts: dict[tuple[int, ...], int] = {}
        self._first_seen: dict[tuple[int, ...], int] = {}
        self._n = 0

    def record(self, log: EpisodeLog) -> None:
        if not log.success:
            raise UsageError("only successful episodes enter the solution table")
        seq = tuple(log.sequence)
        if seq not in self._counts:
            self._counts[seq] = 0
            self._first_seen[seq] = self._n
            self._n += 1
        self._counts[seq] += 1

    def __len__(self):
        return len(self._counts)

    def frequency(self, seq) -> int:
        return self._counts.get(tuple(seq), 0)

    def top(self, k: int | None = None) -> list[tuple[tuple[int, ...], int]]:
        ranked = sorted(self._counts.items(),
                        key=lambda item: (-item[1], self._first_seen[item[0]]))
        return ranked if k is None else ranked[:k]

    @classmethod
    def from_ranked(cls, rows: list[tuple[tuple[int, ...], int]]) -> "SolutionTable":
        """Rebuild from a ranked listing (rank order becomes first-seen order)."""
        table = cls()
        for seq, freq in rows:
            seq = tuple(seq)
            table._counts[seq] = freq
            table._first_seen[seq] = table._n
            table._n += 1
        return table


@dataclass
class Counters:
    env_steps: int = 0
    gradient_steps: int = 0
    target_syncs: int = 0
    first_gradient_step: int = -1  # global env step of the first update, -1 if none
    episodes: int = 0
    successes: int = 0

    def as_doc(self) -> dict:
        return {
            "env_steps": self.env_steps,
            "gradient_steps": self.gradient_steps,
            "target_syncs": self.target_syncs,
            "first_gradient_step": self.first_gradient_step,
            "episodes": self.episodes,
            "successes": self.successes,
        }


def compute_windows(episodes: list[EpisodeLog], window: int) -> list[WindowStat]:
    """Non-overlapping windows partitioning the episode stream (last may be short)."""
    out = []
    for w, start in enumerate(range(0, len(episodes), window)):
        chunk = episodes[start:start + window]
        succ = sum(1 for e in chunk if e.success)
        out.append(WindowStat(w, start, start + len(chunk), len(chunk), succ,
                              succ / len(chunk)))
    return out


def _seq_str(seq) -> str:
    return " ".join(str(a) for a in seq)


def _parse_seq(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.split()) if text else ()


@dataclass
class RunArtifacts:
    config_doc: dict
    episodes: list[EpisodeLog]
    windows: list[WindowStat]
    unique_counts: list[int]  # cumulative distinct states, one entry per episode
    solutions: SolutionTable
    counters: Counters
    checkpoint_doc: dict
    final_eval: dict | None = None
    error: str | None = None

    def summary_doc(self) -> dict:
        return {
            "format": SUMMARY_FORMAT,
            "counters": self.counters.as_doc(),
            "unique_states": self.unique_counts[-1] if self.unique_counts else 0,
            "distinct_solutions": len(self.solutions),
            "checkpoint": "checkpoint.json",
            "final_eval": self.final_eval,
            "error": self.error,
        }

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(canonical_json(self.config_doc), encoding="utf-8")

        lines = ["episode,reward,length,success,pmr,sequence"]
        for e in self.episodes:
            lines.append(f"{e.episode},{e.reward!r},{e.length},{int(e.success)},"
                         f"{e.pmr!r},{_seq_str(e.sequence)}")
        (out / "episodes.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

        lines = ["window,start_episode,end_episode,episodes,successes,frequency"]
        for w in self.windows:
            lines.append(f"{w.window},{w.start_episode},{w.end_episode},{w.episodes},"
                         f"{w.successes},{w.frequency!r}")
        (out / "windows.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

        lines = ["episode,unique_states"]
        for i, count in enumerate(self.unique_counts):
            lines.append(f"{i},{count}")
        (out / "unique_states.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

        lines = ["rank,frequency,sequence"]
        for rank, (seq, freq) in enumerate(self.solutions.top(), start=1):
            lines.append(f"{rank},{freq},{_seq_str(seq)}")
        (out / "solutions.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

        (out / "summary.json").write_text(canonical_json(self.summary_doc()), encoding="utf-8")
        (out / "checkpoint.json").write_text(canonical_json(self.checkpoint_doc),
                                             encoding="utf-8")
        return out

    @classmethod
    def read(cls, run_dir) -> "RunArtifacts":
        run = Path(run_dir)
        if not (run / "summary.json").exists():
            raise DocumentError(f"{run} does not look like a run directory (no summary.json)")
        summary = read_json(run / "summary.json")
        config_doc = read_json(run / "config.json")
        checkpoint_doc = read_json(run / "checkpoint.json")

        episodes = []
        for row in _read_rows(run / "episodes.csv",
                              "episode,reward,length,success,pmr,sequence"):
            episodes.append(EpisodeLog(int(row[0]), float(row[1]), int(row[2]),
                                       row[3] == "1", float(row[4]), _parse_seq(row[5])))
        windows = []
        for row in _read_rows(run / "windows.csv",
                              "window,start_episode,end_episode,episodes,successes,frequency"):
            windows.append(WindowStat(int(row[0]), int(row[1]), int(row[2]), int(row[3]),
                                      int(row[4]), float(row[5])))
        unique_counts = [int(row[1]) for row in
                         _read_rows(run / "unique_states.csv", "episode,unique_states")]
        solutions = SolutionTable.from_ranked(
            [(_parse_seq(row[2]), int(row[1]))
             for row in _read_rows(run / "solutions.csv", "rank,frequency,sequence")])

        counters = Counters(**summary["counters"])
        return cls(config_doc, episodes, windows, unique_counts, solutions, counters,
                   checkpoint_doc, final_eval=summary.get("final_eval"),
                   error=summary.get("error"))


def _read_rows(path: Path, header: str):
    text = path.read_text(encoding="utf-8").rstrip("\n")
    lines = text.split("\n") if text else []
    if not lines or lines[0] != header:
        raise DocumentError(f"{path}: expected header {header!r}")
    ncols = header.count(",") + 1
    for line in lines[1:]:
        yield line.split(",", ncols - 1)
