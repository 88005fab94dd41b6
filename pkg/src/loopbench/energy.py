"""Energy accounting on accumulating hardware counters.

Counters report running totals in microjoules and wrap at a published
maximum range, so interval energy is the wrap-corrected delta summed over
all package domains. Static (idle) power is calibrated by measuring over a
quiet interval and subtracted from measured energy:
E_compensated = E_total - P_static * T_exec.

Two providers exist: one reading counter files under a powercap directory
tree, and a deterministic mock replaying a script of
(timestamp_us, domain, counter_value) triples.
"""

from __future__ import annotations

import os
import re
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

POWERCAP_ROOT_ENV = "LOOPBENCH_POWERCAP_ROOT"
DEFAULT_POWERCAP_ROOT = "/sys/class/powercap"
DEFAULT_MOCK_MAX_RANGE_UJ = 4_294_967_295  # 32-bit microjoule counter
DEFAULT_CALIBRATION_S = 5.0

_DOMAIN_DIR_RE = re.compile(r"^intel-rapl:\d+$")


class ProviderError(Exception):
    """A counter could not be read or the provider is misconfigured."""


class EnergyAnomaly(Exception):
    """Compensation produced a negative energy; carries the value."""

    def __init__(self, value_j: float):
        super().__init__(f"negative compensated energy: {value_j} J")
        self.value_j = value_j


@dataclass(frozen=True)
class DomainReading:
    domain: str
    energy_uj: int
    max_range_uj: int


@dataclass(frozen=True)
class EnergySample:
    domains: tuple[DomainReading, ...]
    timestamp_us: int


@dataclass(frozen=True)
class Measurement:
    t_s: float
    e_total_j: float
    p_static_w: float
    e_comp_j: float
    p_avg_w: float


class HardwareProvider:
    """Reads accumulating counters exposed as files.

    Layout: ``<root>/intel-rapl:<k>/energy_uj`` and ``max_energy_range_uj``.
    The root defaults to /sys/class/powercap and can be overridden with the
    LOOPBENCH_POWERCAP_ROOT environment variable (useful for test fixtures).
    """

    def __init__(self, root: Optional[str] = None):
        self.root = Path(root or os.environ.get(POWERCAP_ROOT_ENV)
                         or DEFAULT_POWERCAP_ROOT)
        self.domain_dirs = sorted(
            d for d in (self.root.iterdir() if self.root.is_dir() else [])
            if _DOMAIN_DIR_RE.match(d.name))
        if not self.domain_dirs:
            raise ProviderError(f"no energy domains under {self.root}")

    def read(self) -> EnergySample:
        readings = []
        for directory in self.domain_dirs:
            try:
                energy = int((directory / "energy_uj").read_text().strip())
                max_range = int(
                    (directory / "max_energy_range_uj").read_text().strip())
            except (OSError, ValueError) as exc:
                raise ProviderError(
                    f"unreadable counter for domain '{directory.name}': {exc}") from exc
            readings.append(DomainReading(directory.name, energy, max_range))
        return EnergySample(tuple(readings), time.monotonic_ns() // 1000)

    def wait(self, seconds: float) -> None:
        time.sleep(seconds)

    def describe(self) -> dict:
        return {
            "machine": os.uname().nodename,
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        }


class MockProvider:
    """Deterministic provider replaying a script.

    The script is a text file of (timestamp_us, domain, counter_value)
    triples, one per line, whitespace- or comma-separated. Lines sharing a
    timestamp form one sample; each read() consumes the next sample. Counter
    values must lie within [0, max_range_uj]; the range defaults to a 32-bit
    microjoule counter and is configurable for wrap-behaviour fixtures.
    """

    def __init__(self, samples: list[EnergySample]):
        if not samples:
            raise ProviderError("mock script contains no samples")
        if any(not s.domains for s in samples):
            raise ProviderError("mock sample with zero domains")
        self.samples = samples
        self.cursor = 0

    @classmethod
    def from_script(cls, text: str,
                    max_range_uj: int = DEFAULT_MOCK_MAX_RANGE_UJ) -> "MockProvider":
        groups: list[tuple[int, list[tuple[str, int]]]] = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = [p for p in re.split(r"[,\s]+", line) if p]
            if len(parts) != 3:
                raise ProviderError(
                    f"mock script line {lineno}: expected 'timestamp domain value'")
            try:
                ts, value = int(parts[0]), int(parts[2])
            except ValueError as exc:
                raise ProviderError(f"mock script line {lineno}: {exc}") from exc
            if not 0 <= value <= max_range_uj:
                raise ProviderError(
                    f"mock script line {lineno}: counter {value} outside "
                    f"[0, {max_range_uj}]")
            if groups and groups[-1][0] == ts:
                groups[-1][1].append((parts[1], value))
            else:
                groups.append((ts, [(parts[1], value)]))
        samples = [
            EnergySample(tuple(DomainReading(d, v, max_range_uj) for d, v in items), ts)
            for ts, items in groups]
        return cls(samples)

    @classmethod
    def from_file(cls, path: str | Path,
                  max_range_uj: int = DEFAULT_MOCK_MAX_RANGE_UJ) -> "MockProvider":
        return cls.from_script(Path(path).read_text(),
                               max_range_uj=max_range_uj)

    def read(self) -> EnergySample:
        if self.cursor >= len(self.samples):
            raise ProviderError("mock script exhausted")
        sample = self.samples[self.cursor]
        self.cursor += 1
        return sample

    def wait(self, seconds: float) -> None:
        pass  # virtual time lives in the script's timestamps

    def describe(self) -> dict:
        return {"machine": "mock", "timestamp": "1970-01-01T00:00:00+0000"}


def read_counters(provider) -> EnergySample:
    """Snapshot all domains plus a timestamp."""
    return provider.read()


def energy_delta_uj(before: EnergySample, after: EnergySample) -> int:
    """Wrap-corrected counter delta summed over domains, in microjoules.

    Assumes at most one wrap per domain: a second wrap within one interval
    is undetectable from endpoint reads alone.
    """
    before_domains = {d.domain: d for d in before.domains}
    after_domains = {d.domain: d for d in after.domains}
    if set(before_domains) != set(after_domains):
        raise ProviderError("samples cover different domain sets")
    total = 0
    for name, b in before_domains.items():
        a = after_domains[name]
        if a.energy_uj >= b.energy_uj:
            total += a.energy_uj - b.energy_uj
        else:
            total += (b.max_range_uj - b.energy_uj) + a.energy_uj
    return total


def energy_delta(before: EnergySample, after: EnergySample) -> float:
    """Interval energy in joules."""
    return energy_delta_uj(before, after) / 1e6


def compensate(e_total_j: float, p_static_w: float, t_exec_s: float) -> float:
    """Subtract the idle baseline; negative results raise EnergyAnomaly."""
    if t_exec_s <= 0:
        raise ValueError("t_exec must be positive")
    if p_static_w < 0:
        raise ValueError("p_static must be non-negative")
    result = e_total_j - p_static_w * t_exec_s
    if result < 0:
        raise EnergyAnomaly(result)
    return result


def make_measurement(t_s: float, e_total_j: float, p_static_w: float) -> Measurement:
    """Derive the compensated-energy and average-power views of one run."""
    e_comp = compensate(e_total_j, p_static_w, t_s)
    return Measurement(t_s=t_s, e_total_j=e_total_j, p_static_w=p_static_w,
                       e_comp_j=e_comp, p_avg_w=e_total_j / t_s)


def calibrate_static(provider, duration_s: float = DEFAULT_CALIBRATION_S) -> float:
    """Idle power in watts: energy over a quiet interval divided by time.

    Elapsed time comes from the sample timestamps so mock calibrations are
    exact; hardware providers sleep for the requested duration between reads.
    """
    if duration_s <= 0:
        raise ValueError("calibration duration must be positive")
    before = provider.read()
    provider.wait(duration_s)
    after = provider.read()
    elapsed_s = (after.timestamp_us - before.timestamp_us) / 1e6
    if elapsed_s <= 0:
        raise ProviderError("calibration interval has non-positive duration")
    return energy_delta(before, after) / elapsed_s
