"""Smoke test for the marlx_py extension.

Build first with `cargo build -p marlx-py --release`, then run
`python3 python/smoke_test.py`. Set MARLX_PY_LIB to point at a specific
shared library instead of the one under target/.
"""

import importlib.machinery
import importlib.util
import math
import os
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_extension():
    candidates = []
    if os.environ.get("MARLX_PY_LIB"):
        candidates.append(Path(os.environ["MARLX_PY_LIB"]))
    for profile in ("release", "debug"):
        for name in ("libmarlx_py.so", "libmarlx_py.dylib", "marlx_py.dll"):
            candidates.append(ROOT / "target" / profile / name)
    for path in candidates:
        if path.exists():
            loader = importlib.machinery.ExtensionFileLoader("marlx_py", str(path))
            spec = importlib.util.spec_from_file_location("marlx_py", str(path), loader=loader)
            module = importlib.util.module_from_spec(spec)
            loader.exec_module(module)
            return module
    sys.exit("marlx_py library not found; run `cargo build -p marlx-py --release`")


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def main():
    m = load_extension()
    checks = []

    def check(name, ok):
        checks.append((name, bool(ok)))
        print(f"{'ok  ' if ok else 'FAIL'} {name}")

    check("rel_overgen spike", m.rel_overgen_reward([0, 0], 40, 30.0) == 12.0)
    check("rel_overgen plateau", m.rel_overgen_reward([39, 39], 40, 30.0) == 0.0)
    check("rel_overgen one off spike", close(m.rel_overgen_reward([1, 0], 40, 30.0), 11.25))

    check("llec clamp", m.llec_from_novelty(1.0, 0.4, 0.5) == 0.0)
    check("llec gain", close(m.llec_from_novelty(1.0, 0.8, 0.5), 0.3))
    check("eec", m.eec_from_bonus(0.125) == 0.5)
    check("jim product", m.jim_product(0.3, 2.0) == 0.6)
    check("lim mean", m.lim_combine([1.0, 2.0, 3.0]) == 2.0)
    check("combined reward", m.combine_reward(1.0, 0.5, 2.0) == 2.0)

    ellipse = m.EllipseState(4, lam=1.0)
    unit = [1.0, 0.0, 0.0, 0.0]
    bonuses = []
    for _ in range(5):
        bonuses.append(ellipse.bonus(unit))
        ellipse.update(unit)
    check("ellipse 1/(1+k)", all(close(b, 1.0 / (1 + k), 1e-10) for k, b in enumerate(bonuses)))
    ellipse.reset()
    check("ellipse reset", ellipse.c_inv() == [[float(i == j) for j in range(4)] for i in range(4)])

    c_inv = m.sherman_morrison_update([[1.0, 0.0], [0.0, 1.0]], [1.0, 1.0])
    expected = [[2.0 / 3.0, -1.0 / 3.0], [-1.0 / 3.0, 2.0 / 3.0]]
    check("sherman-morrison", all(close(c_inv[i][j], expected[i][j]) for i in range(2) for j in range(2)))

    net = m.Mlp([3, 8, 2], seed=1)
    x = [0.3, -0.2, 0.5]
    out = net.forward(x)
    w_grads, b_grads, dx = net.backward(x, [1.0, 0.0])
    eps = 1e-6
    fd = []
    for i in range(3):
        hi = list(x)
        lo = list(x)
        hi[i] += eps
        lo[i] -= eps
        fd.append((net.forward(hi)[0] - net.forward(lo)[0]) / (2 * eps))
    check("mlp shapes", len(out) == 2 and len(dx) == 3 and len(w_grads) == 2 and len(b_grads) == 2)
    check("mlp input gradient", all(abs(a - b) < 1e-6 for a, b in zip(dx, fd)))

    rnd = m.RndModule(6, hidden_dim=16, encoding_dim=8, lr=1e-3, seed=2)
    states = [[float(i == j) for j in range(6)] for i in range(6)]
    before = sum(rnd.novelty(s) for s in states)
    for _ in range(300):
        rnd.train(states)
    after = sum(rnd.novelty(s) for s in states)
    check("rnd novelty decays", after < 0.5 * before)

    mixer = m.MixerNet(2, 4, embed_dim=8, hypernet_hidden=8, seed=3)
    state = [0.1, -0.4, 0.2, 0.7]
    lo = mixer.mix([0.0, 0.5], state)
    hi = mixer.mix([0.1, 0.5], state)
    check("mixer monotone", hi >= lo)
    unit_mixer = m.MixerNet(2, 4, embed_dim=3, seed=0, unit_weights=True)
    check("unit mixer", close(unit_mixer.mix([0.5, 0.25], state), 3 * 0.75))

    buf = m.ReplayBuffer(8, alpha=1.0, beta=1.0, seed=4)
    for p in (1.0, 3.0):
        buf.add(p)
    check("per probability", close(buf.probability(1), 0.75))
    slots, weights = buf.sample(2)
    check("per sample", len(slots) == 2 and all(0 < w <= 1.0 for w in weights))

    env = m.Env("rel_overgen", seed=5, size="20", delta="60", start="center")
    first = env.reset()
    check("env dims", env.n_agents == 2 and env.obs_dim == 20 and len(first["joint_observation"]) == 2)
    total = 0.0
    step = first
    while not step["done"]:
        step = env.step([0, 0])
        total += step["reward"]
    check("scripted rollout", step["step_index"] == 100 and total > 1000.0)

    placement = m.Env("placement", seed=6)
    check("placement obs dim", placement.obs_dim == 43)
    box = m.Env("box_push", seed=7)
    check("box push obs dim", box.obs_dim == 16)

    config = "\n".join([
        "name = smoke",
        "algo = qmix+jim",
        "env.id = rel_overgen",
        "env.size = 6",
        "env.delta = 6",
        "env.episode_length = 10",
        "intrinsic.encoding_dim = 8",
        "intrinsic.hidden_dim = 16",
        "train.batch_size = 4",
        "train.agent_hidden = 16",
        "train.mixer_embed = 8",
        "train.hypernet_hidden = 8",
        "run.total_steps = 400",
        "run.eval_interval = 200",
        "run.eval_episodes = 2",
    ])
    with tempfile.TemporaryDirectory() as tmp:
        records = m.run_training(config, 1, tmp)
        check("run records", [r["env_steps"] for r in records] == [0, 200, 400])
        ckpt = Path(tmp) / "smoke" / "seed_1" / "checkpoint.txt"
        mean, std = m.evaluate_checkpoint(str(ckpt), episodes=2, seed=1)
        check("checkpoint eval", math.isfinite(mean) and std >= 0.0)

    for name, passed, total in m.selftest():
        check(f"selftest {name} {passed}/{total}", passed == total)

    try:
        m.rel_overgen_reward([0, 25], 20, 60.0)
        check("domain error raised", False)
    except ValueError:
        check("domain error raised", True)

    failed = [name for name, ok in checks if not ok]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
