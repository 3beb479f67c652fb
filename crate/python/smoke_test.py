"""Smoke test for the irisattn Python extension.

Build and install first:
    maturin build --release -m crates/py/Cargo.toml -o dist && pip install dist/irisattn-*.whl
Then run:
    python python/smoke_test.py
"""

import json
import math
import random
import tempfile
from pathlib import Path

import irisattn


def gaze_csv():
    rows = ["t_ms,x,y,valid"]
    t = 0
    for cx, n in ((100, 19), (200, 1), (300, 1), (400, 19)):
        for _ in range(n):
            rows.append(f"{t},{cx},100,1")
            t += 16
    return "\n".join(rows) + "\n"


def check_gaze():
    log = gaze_csv()
    assert len(irisattn.parse_gaze_log(log)) == 40
    fixes = irisattn.detect_fixations(log, dispersion=40, min_dur=100)
    assert [f.cx for f in fixes] == [100.0, 400.0], fixes
    assert all(f.duration >= 100 for f in fixes)

    panel = irisattn.ScreenToImageTransform(0.0, 0.0, 2.0, 300, 100)
    u, v = panel.to_image(*panel.to_screen(12.5, 40.0))
    assert abs(u - 12.5) < 1e-9 and abs(v - 40.0) < 1e-9

    clusters = irisattn.cluster_fixations(fixes, panel, min_members=1)
    assert len(clusters) == 2
    hm = irisattn.build_human_map(fixes, panel, sigma=20)
    assert (hm.width, hm.height) == (300, 100)
    assert abs(hm.sum() - 1.0) < 1e-9

    # Duration scaling cancels in the normalized map.
    scaled = [irisattn.FixationEvent(f.t_start * 3, f.t_end * 3, f.cx, f.cy) for f in fixes]
    hm2 = irisattn.build_human_map(scaled, panel, sigma=20)
    assert max(abs(a - b) for a, b in zip(hm.values, hm2.values)) < 1e-12

    try:
        irisattn.parse_gaze_log("0,1,1,7\n")
    except ValueError:
        pass
    else:
        raise AssertionError("bad valid flag accepted")


def check_saliency():
    rng = random.Random(3)
    w, h = 16, 12
    raw = [rng.random() for _ in range(w * h)]
    pe = irisattn.normalize_map(irisattn.SaliencyGrid(w, h, raw))
    q, agreement = irisattn.overlap_q(pe, pe)
    assert abs(q - 1.0) < 1e-9
    assert (agreement.width, agreement.height) == (w, h)

    cam = irisattn.SaliencyGrid(4, 3, [rng.random() for _ in range(12)])
    pc = irisattn.prepare_cam(cam, w, h)
    q, _ = irisattn.overlap_q(pc, pe)
    naive = sum(math.sqrt(a * b) for a, b in zip(pc.values, pe.values))
    assert 0.0 <= q <= 1.0 and abs(q - naive) < 1e-9

    back = irisattn.SaliencyGrid.from_bytes(pe.to_json().encode())
    assert back.values == pe.values
    try:
        irisattn.overlap_q(pc, irisattn.normalize_map(cam))
    except ValueError:
        pass
    else:
        raise AssertionError("shape mismatch accepted")


def check_eval():
    rng = random.Random(11)
    gen = [rng.gauss(2, 1) for _ in range(4000)]
    imp = [rng.gauss(0, 1) for _ in range(4000)]
    curve = irisattn.roc_eer(gen, imp)
    assert abs(curve["eer"] - 0.1587) < 0.03, curve["eer"]
    assert 0.8 < curve["auc"] <= 1.0

    scores = {
        "classes": 2,
        "splits": 1,
        "rows": [
            {"softmax": [0.9, 0.1], "label": 0, "split": 0},
            {"softmax": [0.6, 0.4], "label": 1, "split": 0},
        ],
    }
    acc = irisattn.classification_accuracy(json.dumps(scores))
    assert acc["mean"] == 0.5
    g, i = irisattn.scores_to_comparisons(json.dumps(scores))
    assert sorted(g) == [0.4, 0.9] and sorted(i) == [0.1, 0.6]

    def rec(pair, source, verdict, pmi):
        return json.dumps({"pair_id": pair, "source": source, "verdict": verdict,
                           "ground_truth": "genuine", "pmi_days": pmi})

    log = "\n".join([
        rec("a", "machine", "genuine", 2), rec("a", "human:A", "impostor", 2),
        rec("b", "machine", "impostor", 20), rec("b", "human:A", "genuine", 20),
    ]) + "\n"
    ens = irisattn.ensemble_or(log, ["machine", "humanA"])
    assert ens["accuracy"] == 1.0 and len(ens["verdicts"]) == 2
    rows = irisattn.accuracy_by_pmi(log, [7], members=["machine", "human:A"])
    assert {r["source"] for r in rows} == {"machine", "human:A", "ensemble"}


def check_service():
    pool = [
        {"pair_id": f"p{i}", "ground_truth": "genuine" if i < 3 else "impostor",
         "left": {"uri": f"img/{i}.png", "eye_id": f"e{i}", "pmi_days": i},
         "right": {"uri": f"img/{i}b.png", "eye_id": f"e{i}" if i < 3 else f"x{i}", "pmi_days": i}}
        for i in range(6)
    ]
    with tempfile.TemporaryDirectory() as root:
        svc = irisattn.ExperimentService(root, json.dumps(pool), default_k=4, fsync=False)
        s = svc.create_session("A", seed=1)
        sid = s["session_id"]
        assert s["total"] == 4
        while True:
            nxt = svc.next_pair(sid)
            if nxt["status"] == "complete":
                break
            assert "ground_truth" not in json.dumps(nxt)
            svc.record_decision(sid, nxt["pair_id"], "genuine", elapsed_ms=500)
            try:
                svc.record_decision(sid, nxt["pair_id"], "genuine")
            except irisattn.ConflictError:
                pass
            else:
                raise AssertionError("duplicate accepted")
        report = svc.session_report(sid)
        assert report["answered"] == 4 and report["accuracy"] == 0.5
        assert Path(svc.log_path).exists()

        try:
            svc.create_session("B", k=99)
        except irisattn.CapacityError:
            pass
        else:
            raise AssertionError("over-capacity session accepted")
        try:
            svc.next_pair("missing")
        except KeyError:
            pass
        else:
            raise AssertionError("unknown session accepted")

        svc.put_grid("p0", "cam_left", json.dumps({"width": 2, "height": 2, "values": [1, 1, 1, 1]}).encode())
        svc.put_grid("p0", "human_left", json.dumps({"width": 4, "height": 4, "values": [1] * 16}).encode())
        assert abs(svc.pair_q("p0", "left") - 1.0) < 1e-12
        assert svc.put_gaze_log("p0", "subjA", gaze_csv()) == 40
        assert svc.get_gaze_log("p0", "subjA") == gaze_csv()


def main():
    for check in (check_gaze, check_saliency, check_eval, check_service):
        check()
        print(f"ok  {check.__name__}")
    print("python smoke test passed")


if __name__ == "__main__":
    main()
