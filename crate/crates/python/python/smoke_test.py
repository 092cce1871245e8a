"""Smoke test for the augsearch extension module.

Build it with `maturin develop -m crates/python/Cargo.toml`, or run
`cargo build -p augsearch-python` and put target/debug/libaugsearch.so on
PYTHONPATH as augsearch.so.
"""

import math

import augsearch

CONTEXT = (
    "fresh install of crack of the day : gdm login → \" can't access ACPI bla bla bla \" "
    "__eou__ you don't want to be me ... __eou__ ah , it happened to you too ?"
)


def main():
    lex = augsearch.Lexicons()
    ctx = augsearch.tokenize(CONTEXT, lex)
    assert ctx.detokenize() == CONTEXT
    assert ctx.word_count() == 34
    assert ("__eou__", None) in ctx.items()

    assert augsearch.search_space_size() == 480**8

    policy = augsearch.Policy.parse("(D_v,3,0.2)(R,1,0.5)")
    assert len(policy.encode()) == 24
    assert augsearch.Policy.from_indices(policy.encode()) == policy
    assert augsearch.Policy.parse(policy.to_json()) == policy
    assert policy.sub_policies()[0] == [("D_v", 3, 0.2), ("R", 1, 0.5)]
    try:
        augsearch.Policy.parse("(Q,1,0.5)")
    except ValueError as e:
        assert "unknown operation" in str(e)
    else:
        raise AssertionError("bad policy parsed")

    line = CONTEXT + "\ttry sudo apt-get install acpi"
    out, stats = augsearch.augment([line], policy, lex, seed=7)
    assert out[0] != line and out[0].endswith("\ttry sudo apt-get install acpi")
    assert stats["D_v"][1] == 1 and stats["R"][1] == 1
    again, _ = augsearch.augment([line], policy, lex, seed=7)
    assert again == out
    unchanged, _ = augsearch.augment([line], policy, lex, seed=0)
    assert unchanged == [line]

    assert augsearch.f1(["mount", "boot"], ["mount"]) == 2 / 3
    report = augsearch.corpus_f1(["install the driver"], ["install the disk"], lex)
    assert report["activity_f1"] == 1.0 and report["entity_f1"] == 0.0
    assert report["weighted"] == augsearch.weighted_reward(1.0, 0.0) == 1.0

    uniform = -8 * (math.log(12) + math.log(4) + math.log(10))
    for mode in ("agnostic", "aware"):
        controller = augsearch.Controller(mode=mode, seed=1, hidden=16, embed=8)
        sampled, log_prob = controller.sample(seed=3, source=ctx)
        assert sampled == controller.sample(seed=3, source=ctx)[0]
        assert math.isclose(log_prob, uniform, rel_tol=1e-12)
        assert math.isclose(controller.log_prob(sampled, ctx), log_prob, rel_tol=1e-12)
        assert controller.parameter_count() > 0

    print("augsearch smoke test ok")


if __name__ == "__main__":
    main()
