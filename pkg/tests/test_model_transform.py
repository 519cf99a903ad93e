import io
import json
import random

import pytest

from abconv.cost_model import ConvSpec, STANDARD, cost
from abconv.errors import DuplicateLayerName, ParseError
from abconv.model_transform import (
    LayerRecord,
    ModelIR,
    apply_policy,
    dump_model,
    load_bundled_model,
    parse_model,
    parse_policy,
    policy_tags,
    summarize,
    write_report_csv,
)


def six_pointwise(stem=True):
    layers = [{"name": "stem", "s_o": 8, "k": 3, "c_in": 32, "c_out": 512}] if stem else []
    layers += [{"name": f"pw{i}", "s_o": 4, "k": 1, "c_in": 512, "c_out": 512} for i in range(6)]
    return json.dumps({"name": "toy", "layers": layers})


def test_parse_bundled_mobilenet():
    m = load_bundled_model("mobilenetv1-cifar")
    assert len(m.layers) == 13
    assert all(l.replaceable for l in m.layers if l.spec.k == 1)


def test_parse_bundled_resnet():
    m = load_bundled_model("resnet50-cifar")
    assert any(not l.replaceable for l in m.layers)


def test_parse_errors():
    with pytest.raises(ParseError, match="at least one layer"):
        parse_model('{"name": "x", "layers": []}')
    dup = {"name": "x", "layers": [{"name": "a", "s_o": 1, "k": 1, "c_in": 1, "c_out": 1}] * 2}
    with pytest.raises(DuplicateLayerName):
        parse_model(json.dumps(dup))
    with pytest.raises(ParseError) as err:
        parse_model('{"name": "x",\n "layers": [\n {"name": "a", "s_o": 1, "k": 1, "c_in": 0, "c_out": 1}]}')
    assert err.value.field == "layers[0].c_in" and err.value.line == 3
    with pytest.raises(ParseError) as err:
        parse_model('{"name": "x", "layers": [}')
    assert err.value.line == 1


def test_dump_parse_round_trip():
    m = apply_policy(parse_model(six_pointwise()), _profile(), "A-E")
    assert parse_model(dump_model(m)) == m


def _profile():
    from abconv.roofline import load_profile
    return load_profile("ethos-u65-like")


def test_policy_parsing():
    assert parse_policy("A-P-P") == ("A", "P", "P")
    assert parse_policy("ape") == ("A", "P", "E")
    with pytest.raises(ValueError):
        parse_policy("A-X")
    with pytest.raises(ValueError):
        parse_policy("--")


def test_policy_p_is_identity():
    m = parse_model(six_pointwise())
    out = apply_policy(m, _profile(), "P")
    assert out == m and dump_model(out) == dump_model(m)


def test_policy_a_p_p():
    m = apply_policy(parse_model(six_pointwise()), _profile(), "A-P-P")
    assert policy_tags(m) == list("APPAPP")
    assert m.layers[0].variant == STANDARD  # k=3 passes through


def test_policy_a_gated_layer_stays_standard():
    m = parse_model(six_pointwise(stem=False))
    odd = LayerRecord("odd", ConvSpec(4, 1, 1000, 512))
    m = ModelIR("toy", m.layers + (odd,))
    out = apply_policy(m, _profile(), "A")
    assert policy_tags(out) == list("AAAAAAP")
    assert out.layers[-1].gated


def test_policy_locality():
    m = parse_model(six_pointwise())
    base = policy_tags(apply_policy(m, _profile(), "P-P-P"))
    changed = policy_tags(apply_policy(m, _profile(), "P-E-P"))
    assert [i for i, (a, b) in enumerate(zip(base, changed)) if a != b] == [1, 4]


def test_policy_conservation_and_mac_shrink():
    m = load_bundled_model("resnet50-cifar")
    out = apply_policy(m, _profile(), "A")
    before, after = summarize(m, _profile()), summarize(out, _profile())
    for layer, r0, r1 in zip(out.layers, before.rows, after.rows):
        assert r1.macs * layer.variant.g == r0.macs
    acts = lambda model: sum(cost(l.spec, l.variant).activation_elems for l in model.layers)
    assert acts(m) == acts(out)


def test_summarize_table3_layer():
    spec = {"name": "t3", "layers": [{"name": "pw", "s_o": 4, "k": 1, "c_in": 1024, "c_out": 1024}]}
    m = parse_model(json.dumps(spec))
    r = summarize(m, _profile())
    assert (r.total_macs, r.total_params) == (16_777_216, 1_048_576)
    r = summarize(apply_policy(m, _profile(), "A"), _profile())
    assert (r.rows[0].g, r.total_macs, r.total_params) == (4, 4_194_304, 65_536)


def test_report_totals_random_models():
    rng = random.Random(5)
    profile = _profile()
    for trial in range(100):
        layers = [LayerRecord(f"l{i}", ConvSpec(rng.choice([2, 4, 8, 16]), rng.choice([1, 1, 3]),
                                                 32 * rng.randint(1, 16), 16 * rng.randint(1, 32)))
                  for i in range(rng.randint(1, 12))]
        m = apply_policy(ModelIR(f"m{trial}", layers), profile, rng.choice(["A", "E", "A-P", "E-P-A"]))
        r = summarize(m, profile)
        assert r.total_macs == sum(row.macs for row in r.rows)
        assert r.total_params == sum(row.params for row in r.rows)
        assert r.total_latency_s == sum(row.est_latency_s for row in r.rows)


def test_report_csv():
    m = apply_policy(parse_model(six_pointwise(stem=False)), _profile(), "A-P")
    buf = io.StringIO()
    write_report_csv(buf, summarize(m, _profile()))
    lines = buf.getvalue().splitlines()
    assert lines[0] == "layer,variant,g,macs,params,weight_ai,activation_ai,whole_ai,est_latency_us"
    assert lines[-1].startswith("TOTAL,")
    total = int(lines[-1].split(",")[3])
    assert total == sum(int(l.split(",")[3]) for l in lines[1:-1])
