import math
import os

import pytest

import pivotattack as pa


def toy_store():
    return pa.EmbeddingStore(
        ["great", "fine", "film", "a", "shaping", "one", "character", "dull"],
        [
            [1.0, 0.0, 0.0, 0.0],
            [0.9, 0.43589, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.1, 0.995],
            [0.05, 0.0, 0.7, 0.7],
            [0.0, 0.1, 0.0, 1.0],
            [0.0, 0.2, 0.9, 0.1],
            [-0.9, 0.1, 0.0, 0.0],
        ],
    )


def test_kl_and_bounds():
    assert pa.bernoulli_kl(0.5, 0.25) == pytest.approx(0.143841036225890, abs=1e-12)
    assert pa.kl_lower_bound(1.0, 5, -math.log(0.85)) == pytest.approx(0.9680187850, abs=1e-9)
    assert pa.kl_upper_bound(0.5, 10, 1.0) == pytest.approx(0.712878631455824, abs=1e-9)
    assert pa.exploration_rate(5, 1) == pytest.approx(2.34404133824924, abs=1e-9)


def test_config_and_threshold():
    cfg = pa.AttackConfig()
    assert cfg.budget == 100 and cfg.pivot_quota() == 80
    assert pa.dynamic_threshold(cfg, 20, 200) == pytest.approx(0.2)
    assert pa.perturbation_rate(["a", "b"], ["a", "c"]) == 0.5
    cfg.threshold = 2.0
    with pytest.raises(ValueError):
        cfg.validate()


def test_store_queries():
    store = toy_store()
    assert len(store) == 8 and store.dimension == 4
    assert "great" in store
    assert store.nearest("great", 1) == ["fine"]


def test_attack_with_rule_victim():
    victim = pa.RuleVictim.keyword(["great"])
    rec = pa.run_attack("shaping one great character", 1, victim, toy_store())
    assert rec["success"]
    assert rec["adversarial_tokens"][2] == "fine"
    assert rec["queries_used"] <= 100
    summary = pa.summarize([rec])
    assert summary["asr"] == 100.0


def test_python_callable_victim():
    calls = []

    def victim(tokens):
        calls.append(list(tokens))
        return 1 if "great" in tokens else 0

    res = pa.find_pivot("shaping one great character", 1, victim)
    assert 2 in res["pivot"]
    assert len(calls) == res["queries_used"]


def test_load_vectors(tmp_path):
    path = os.path.join(os.environ.get("PIVOT_TEST_DATA", ""), "vectors.txt")
    if not os.path.exists(path):
        pytest.skip("test data not available")
    store = pa.EmbeddingStore.load(path)
    assert store.dimension == 4
    bad = tmp_path / "bad.txt"
    bad.write_text("a 1 2\nb 1\n")
    with pytest.raises(pa.EmbeddingFormatError):
        pa.EmbeddingStore.load(str(bad))
