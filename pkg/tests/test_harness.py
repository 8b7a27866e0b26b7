import copy
import json

import pytest

from polarcm.harness import (
    CSV_COLUMNS,
    ConfigError,
    SimConfig,
    read_csv,
    run_simulation,
    write_csv,
)

BASE = {
    "version": "v1",
    "scheme": {"kind": "bicm", "n_sym": 32, "constellation": {"type": "ask", "m": 1}},
    "construction": {"estimator": "ga", "design_snr_db": 1.0, "k": 16},
    "snr": {"points": [0.0, 1.0, 2.0]},
    "stopping": {"min_frame_errors": 20, "max_frames": 2000},
    "master_seed": 5,
}


def make(**changes):
    doc = copy.deepcopy(BASE)
    for key, val in changes.items():
        doc[key] = val
    return doc


@pytest.mark.parametrize("mutate, path", [
    (lambda d: d.pop("scheme"), "scheme"),
    (lambda d: d["snr"].update(points=[]), "snr.points"),
    (lambda d: d["snr"].update(points=["x"]), "snr.points"),
    (lambda d: d["snr"].update(reference="snr"), "snr.reference"),
    (lambda d: d["stopping"].update(min_frame_errors=0), "stopping.min_frame_errors"),
    (lambda d: d["stopping"].update(max_frames=0), "stopping.max_frames"),
    (lambda d: d["stopping"].update(max_frames=True), "stopping.max_frames"),
    (lambda d: d.update(workers=0), "workers"),
    (lambda d: d.update(version="v2"), "version"),
    (lambda d: d["scheme"].update(kind="tcm"), "scheme.kind"),
    (lambda d: d["scheme"].update(n_sym=24), "scheme.n_sym"),
    (lambda d: d["scheme"]["constellation"].update(m=0), "scheme.constellation"),
    (lambda d: d["scheme"].update(interleaver="spiral"), "scheme.interleaver"),
    (lambda d: d["construction"].update(k=33), "construction.k"),
    (lambda d: d["construction"].update(estimator="pw"), "construction.estimator"),
    (lambda d: d["construction"].pop("k"), "construction.k"),
    (lambda d: d.update(decoder={"checknode": "bp"}), "decoder.checknode"),
    (lambda d: d.update(decoder={"demapper": "app"}), "decoder.demapper"),
])
def test_config_errors_carry_field_path(mutate, path):
    doc = copy.deepcopy(BASE)
    mutate(doc)
    with pytest.raises(ConfigError) as info:
        SimConfig.from_dict(doc)
    assert info.value.path == path
    assert path in str(info.value)


def test_config_error_is_value_error():
    assert issubclass(ConfigError, ValueError)


def test_load_missing_and_invalid(tmp_path):
    missing = tmp_path / "nope.json"
    with pytest.raises(ConfigError) as info:
        SimConfig.load(missing)
    assert str(missing) in str(info.value)
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        SimConfig.load(bad)


def test_config_dict_round_trip():
    cfg = SimConfig.from_dict(BASE)
    assert SimConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.min_frame_errors == 20 and cfg.snr_points == (0.0, 1.0, 2.0)


def test_defaults():
    doc = make()
    doc.pop("stopping")
    cfg = SimConfig.from_dict(doc)
    assert (cfg.min_frame_errors, cfg.max_frames) == (100, 10 ** 7)
    assert cfg.snr_reference == "esn0" and cfg.workers == 1


def test_digest_ignores_workers_and_output():
    a = SimConfig.from_dict(make(workers=1, output=None))
    b = SimConfig.from_dict(make(workers=3, output="x.csv"))
    c = SimConfig.from_dict(make(master_seed=6))
    assert a.digest() == b.digest()
    assert a.digest() != c.digest()


def test_noiseless_point_runs_to_max_frames():
    cfg = SimConfig.from_dict(make(snr={"points": [60.0]}, stopping={"min_frame_errors": 1, "max_frames": 300}))
    (p,) = run_simulation(cfg, write=False).points
    assert (p.frames, p.bit_errors, p.frame_errors) == (300, 0, 0)
    assert p.ber == 0.0 and p.fer == 0.0
    assert p.info_bits == 300 * 16


def test_all_frozen_code(tmp_path):
    out = tmp_path / "k0.csv"
    cfg = SimConfig.from_dict(make(construction={"estimator": "ga", "design_snr_db": 0.0, "k": 0},
                                   snr={"points": [-5.0]}, stopping={"min_frame_errors": 1, "max_frames": 50},
                                   output=str(out)))
    (p,) = run_simulation(cfg).points
    assert p.info_bits == 0 and p.ber is None
    assert p.frame_errors == 0 and p.fer == 0.0 and p.frames == 50
    rows = [line for line in out.read_text().splitlines() if not line.startswith("#")]
    rec = dict(zip(rows[0].split(","), rows[1].split(",")))
    assert rec["ber"] == "" and rec["ber_undefined"] == "1" and rec["ebn0_db"] == ""


def test_ebn0_needs_information_bits():
    cfg = SimConfig.from_dict(make(construction={"estimator": "ga", "design_snr_db": 0.0, "k": 0},
                                   snr={"points": [0.0], "reference": "ebn0"}))
    with pytest.raises(ConfigError):
        run_simulation(cfg, write=False)


def test_ebn0_reference():
    cfg = SimConfig.from_dict(make(snr={"points": [3.0], "reference": "ebn0"},
                                   stopping={"min_frame_errors": 5, "max_frames": 100}))
    (p,) = run_simulation(cfg, write=False).points
    # rate 1/2 bit per BPSK symbol: Es/N0 = Eb/N0 - 3.0103 dB
    assert p.snr_ref == "ebn0" and p.ebn0_db == 3.0
    assert p.esn0_db == pytest.approx(3.0 - 3.0103, abs=1e-4)


def test_stopping_rule():
    cfg = SimConfig.from_dict(make(snr={"points": [-2.0]}, stopping={"min_frame_errors": 7, "max_frames": 10 ** 5}))
    (p,) = run_simulation(cfg, write=False).points
    assert p.frame_errors == 7
    assert p.frames < 10 ** 5


def test_counters_invariant_to_workers_and_batch():
    doc = make(stopping={"min_frame_errors": 15, "max_frames": 400})
    ref = run_simulation(SimConfig.from_dict(doc), write=False).counters()
    for workers, batch in [(2, 64), (1, 7), (3, 5)]:
        got = run_simulation(SimConfig.from_dict(make(stopping=doc["stopping"], workers=workers,
                                                      batch_size=batch)), write=False).counters()
        assert got == ref


def test_seed_changes_results():
    a = run_simulation(SimConfig.from_dict(make()), write=False).counters()
    b = run_simulation(SimConfig.from_dict(make(master_seed=99)), write=False).counters()
    assert a != b


def test_fer_ber_nonincreasing_in_snr():
    cfg = SimConfig.from_dict(make(snr={"points": [-1.0, 1.0, 3.0]},
                                   stopping={"min_frame_errors": 60, "max_frames": 20_000}))
    pts = run_simulation(cfg, write=False).points
    for lo, hi in zip(pts, pts[1:]):
        assert hi.fer <= lo.fer and hi.ber <= lo.ber


def test_csv_round_trip(tmp_path):
    out = tmp_path / "r.csv"
    cfg = SimConfig.from_dict(make(output=str(out)))
    res = run_simulation(cfg)
    back = read_csv(out)
    assert back.counters() == res.counters()
    assert back.config_digest == cfg.digest()
    assert back.config == json.loads(json.dumps(cfg.to_dict()))
    assert [p.esn0_db for p in back.points] == [p.esn0_db for p in res.points]
    text = out.read_text().splitlines()
    header = [line for line in text if not line.startswith("#")][0]
    assert tuple(header.split(",")) == CSV_COLUMNS
    assert text[0].startswith("# polarcm ")
    for p in back.points:
        assert 0 <= p.ber <= 1 and 0 <= p.fer <= 1
        assert p.ber == p.bit_errors / p.info_bits


def test_unwritable_output(tmp_path):
    cfg = SimConfig.from_dict(make(output=str(tmp_path / "missing" / "r.csv"),
                                   stopping={"min_frame_errors": 1, "max_frames": 10}))
    with pytest.raises(OSError):
        run_simulation(cfg)


def test_write_csv_empty_result(tmp_path):
    from polarcm.harness import SimResult
    write_csv(SimResult(), tmp_path / "e.csv")
    assert read_csv(tmp_path / "e.csv").points == []


def test_mlc_and_qam_run():
    doc = make(scheme={"kind": "mlc", "n_sym": 16, "constellation": {"type": "qam", "m": 4}},
               construction={"estimator": "mc", "design_snr_db": 10.0, "k": 32, "mc_trials": 200},
               snr={"points": [60.0]}, stopping={"min_frame_errors": 1, "max_frames": 40})
    (p,) = run_simulation(SimConfig.from_dict(doc), write=False).points
    assert p.frame_errors == 0 and p.info_bits == 40 * 32
