import pytest
from hypothesis import given
from hypothesis import strategies as st

from loopbench.energy import (
    DomainReading, EnergyAnomaly, EnergySample, HardwareProvider,
    MockProvider, ProviderError, calibrate_static, compensate, energy_delta,
    energy_delta_uj, make_measurement, read_counters,
)

MAX_RANGE = 262143


def sample(ts, **domains):
    return EnergySample(tuple(DomainReading(d, v, MAX_RANGE)
                              for d, v in sorted(domains.items())), ts)


def test_scripted_mock_reports_its_values():
    provider = MockProvider.from_script("0 package-0 1234",
                                        max_range_uj=MAX_RANGE)
    reading = read_counters(provider)
    assert reading.domains[0].energy_uj == 1234
    assert reading.domains[0].max_range_uj == MAX_RANGE


def test_mock_with_no_samples_is_a_configuration_error():
    with pytest.raises(ProviderError):
        MockProvider.from_script("")


def test_hardware_provider_reads_counter_files(tmp_path):
    for k, value in enumerate((100, 200)):
        domain = tmp_path / f"intel-rapl:{k}"
        domain.mkdir()
        (domain / "energy_uj").write_text(f"{value}\n")
        (domain / "max_energy_range_uj").write_text("262143\n")
    (tmp_path / "intel-rapl:0:0").mkdir()  # subdomains are not counted
    provider = HardwareProvider(root=str(tmp_path))
    reading = provider.read()
    assert [d.domain for d in reading.domains] == ["intel-rapl:0", "intel-rapl:1"]
    assert [d.energy_uj for d in reading.domains] == [100, 200]


def test_hardware_provider_requires_a_domain(tmp_path):
    with pytest.raises(ProviderError):
        HardwareProvider(root=str(tmp_path))


def test_hardware_provider_propagates_unreadable_counters(tmp_path):
    domain = tmp_path / "intel-rapl:0"
    domain.mkdir()
    (domain / "energy_uj").write_text("not-a-number\n")
    (domain / "max_energy_range_uj").write_text("262143\n")
    provider = HardwareProvider(root=str(tmp_path))
    with pytest.raises(ProviderError, match="intel-rapl:0"):
        provider.read()


def test_delta_without_wrap():
    assert energy_delta_uj(sample(0, a=100), sample(1, a=400)) == 300
    assert energy_delta(sample(0, a=100), sample(1, a=400)) == 300 / 1e6


def test_delta_with_a_single_wrap():
    assert energy_delta_uj(sample(0, a=262000), sample(1, a=100)) == 243


def test_deltas_sum_over_domains():
    before = sample(0, a=100, b=262000)
    after = sample(1, a=400, b=100)
    assert energy_delta_uj(before, after) == 543


def test_delta_requires_matching_domains():
    with pytest.raises(ProviderError):
        energy_delta_uj(sample(0, a=1), sample(1, b=1))


def test_delta_of_identical_samples_is_zero():
    s = sample(0, a=7, b=9)
    assert energy_delta_uj(s, s) == 0


@given(st.integers(0, MAX_RANGE), st.integers(0, MAX_RANGE))
def test_delta_is_never_negative_and_bounded(before_uj, after_uj):
    delta = energy_delta_uj(sample(0, a=before_uj), sample(1, a=after_uj))
    assert 0 <= delta <= MAX_RANGE


def test_compensation_formula():
    assert compensate(100.0, 20.0, 2.0) == 60.0
    assert compensate(42.5, 0.0, 3.0) == 42.5


def test_compensation_anomaly_carries_the_negative_value():
    with pytest.raises(EnergyAnomaly) as err:
        compensate(10.0, 20.0, 1.0)
    assert err.value.value_j == -10.0


def test_compensation_is_linear():
    base = compensate(100.0, 10.0, 2.0)
    assert compensate(200.0, 10.0, 2.0) == base + 100.0
    assert compensate(100.0, 10.0, 4.0) == base - 20.0


def test_measurement_invariants():
    m = make_measurement(2.0, 100.0, 20.0)
    assert m.p_avg_w == 100.0 / 2.0
    assert m.e_comp_j == 100.0 - 20.0 * 2.0


def test_calibration_with_constant_draw():
    script = "0 package-0 0\n1000000 package-0 50000000\n"
    provider = MockProvider.from_script(script)
    assert calibrate_static(provider, 1.0) == 50.0


def test_calibration_across_a_wrap():
    # expected delta computed by the wrap rule: (262143 - 262000) + 100
    start, end = 262000, 100
    expected_w = ((MAX_RANGE - start) + end) / 1e6 / 1.0
    script = f"0 package-0 {start}\n1000000 package-0 {end}\n"
    provider = MockProvider.from_script(script, max_range_uj=MAX_RANGE)
    assert calibrate_static(provider, 1.0) == pytest.approx(expected_w, rel=1e-12)


def test_scripts_outside_the_counter_range_are_rejected():
    with pytest.raises(ProviderError, match="outside"):
        MockProvider.from_script("0 a 5000000000\n")
    with pytest.raises(ProviderError, match="outside"):
        MockProvider.from_script("0 a 900000\n", max_range_uj=MAX_RANGE)


def test_calibration_rejects_nonpositive_duration():
    provider = MockProvider.from_script("0 a 0\n1000000 a 1000")
    with pytest.raises(ValueError):
        calibrate_static(provider, 0)


def test_mock_is_deterministic_given_its_script():
    script = "0 a 0\n500000 a 10\n1000000 a 30\n"
    p1 = MockProvider.from_script(script)
    p2 = MockProvider.from_script(script)
    assert [p1.read(), p1.read(), p1.read()] == [p2.read(), p2.read(), p2.read()]
    with pytest.raises(ProviderError, match="exhausted"):
        p1.read()
