import json
from fractions import Fraction

import numpy as np
import pytest

from bellsim import models, protocol, serialize
from bellsim.errors import ValidationError
from bellsim.quantum import singlet_table


def roundtrip(model, tmp_path):
    path = tmp_path / "model.json"
    serialize.save_model(model, path)
    return serialize.load_model(path)


def test_product_model_roundtrip(tmp_path, pairs):
    rng = np.random.default_rng(3)
    model = models.random_product_model(rng, outcomes=(-1, 0, 1))
    loaded = roundtrip(model, tmp_path)
    for p in pairs:
        np.testing.assert_allclose(
            models.contextual_joint(model, p).table,
            models.contextual_joint(loaded, p).table,
            atol=1e-15,
        )
        idx = np.arange(200, dtype=np.uint64)
        for got, want in zip(loaded.sample_windows(p, idx, 5), model.sample_windows(p, idx, 5)):
            np.testing.assert_array_equal(got, want)


def test_exact_weights_survive_as_decimal_strings(tmp_path):
    (sx, sxp), (sy, syp) = models.chsh_settings()
    exact = ((Fraction(1, 3), Fraction(2, 3)),)
    source = models.FiniteJointSource(np.array([[1 / 3, 2 / 3]]), exact)
    inst = {s: models.FiniteInstrument(np.ones(1), (Fraction(1),)) for s in (sx, sxp, sy, syp)}
    resp = {s: np.array([[1]]) if s.side == "A" else np.array([[1], [-1]])
            for s in (sx, sxp, sy, syp)}
    model = models.ContextualProductModel(source, (sx, sxp), (sy, syp), inst, resp)
    doc = serialize.model_to_dict(model)
    assert doc["source"]["weights"][0]["weight"] == "1/3"
    loaded = serialize.model_from_dict(doc)
    assert loaded.source.exact == exact


def test_shv_lrhv_fitted_coincidence_roundtrip(tmp_path, pairs):
    rng = np.random.default_rng(4)
    shv = models.random_shv_model(rng, zero_outcomes=True)
    lrhv = models.random_lrhv_model(rng)
    fitted = models.fit_contextual({p: singlet_table(p.x.angle, p.y.angle) for p in pairs})
    coin = models.coincidence_instance(3.5, 2.0)
    for model in (shv, lrhv, fitted):
        loaded = roundtrip(model, tmp_path)
        for p in pairs:
            np.testing.assert_allclose(
                models.joint_distribution(model, p).table,
                models.joint_distribution(loaded, p).table,
                atol=1e-15,
            )
    loaded_coin = roundtrip(coin, tmp_path)
    assert loaded_coin == coin


def test_unknown_family_rejected():
    with pytest.raises(ValidationError):
        serialize.model_from_dict({"family": "telepathic"})


def test_log_roundtrip(tmp_path, pairs):
    model = models.coincidence_instance()
    log = protocol.run_experiment(
        model, protocol.SettingSchedule(pairs), 5_000, 0.3, seed=77
    )
    path = tmp_path / "run.csv"
    serialize.write_log_csv(log, path)
    loaded = serialize.read_log_csv(path)
    np.testing.assert_array_equal(loaded.pair_index, log.pair_index)
    np.testing.assert_array_equal(loaded.a, log.a)
    np.testing.assert_array_equal(loaded.b, log.b)
    np.testing.assert_array_equal(loaded.delay_a, log.delay_a)  # repr round-trip
    assert loaded.meta.seed == 77
    assert loaded.meta.window == 0.3
    assert [p.labels for p in loaded.pairs] == [p.labels for p in log.pairs]


def test_log_missing_sidecar(tmp_path):
    path = tmp_path / "orphan.csv"
    path.write_text("window,setting_a,setting_b,a,b,delay_a,delay_b\n")
    with pytest.raises(ValidationError, match="sidecar"):
        serialize.read_log_csv(path)


def test_log_malformed_row_reports_line(tmp_path, pairs):
    model = models.coincidence_instance()
    log = protocol.run_experiment(model, protocol.SettingSchedule(pairs), 10, 0.3, seed=1)
    path = tmp_path / "run.csv"
    serialize.write_log_csv(log, path)
    lines = path.read_text().splitlines()
    lines[3] = "2,x,y,one,1,0.0,0.0"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValidationError, match=":4:"):
        serialize.read_log_csv(path)


def test_counts_roundtrip(tmp_path, pairs):
    model = models.coincidence_instance()
    counts = protocol.scan_pairs(model, pairs, 20_000, 0.2, seed=5)
    path = tmp_path / "counts.csv"
    serialize.write_counts_csv(counts, path)
    loaded = serialize.read_counts_csv(path)
    for p in pairs:
        np.testing.assert_array_equal(loaded.table(p), counts.table(p))
