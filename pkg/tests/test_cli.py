import json

import numpy as np
import pytest

from codecbench.cli import main
from codecbench.report import round_floats
from codecbench.video_io import write_y4m

from conftest import make_info, offset_frame, random_frame

RD_HEADER = "codec,sequence,metric,label,bitrate_kbps,quality\n"
TIMING_HEADER = "codec,sequence,qp,wall_seconds,frame_count,fps_num,fps_den\n"


def write_pair(tmp_path, rng, frames=3, width=32, height=32, bit_depth=8, delta=0):
    info = make_info(width, height, bit_depth=bit_depth)
    limit = info.sample_max - delta if delta else info.sample_max + 1
    ref = []
    for i in range(frames):
        frame = random_frame(info, rng, i)
        if delta:
            clipped = tuple(np.minimum(p, limit).astype(p.dtype) for p in frame.planes)
            frame = type(frame)(info=info, planes=clipped, frame_index=i)
        ref.append(frame)
    test = [offset_frame(f, delta) for f in ref] if delta else ref
    ref_path, test_path = tmp_path / "ref.y4m", tmp_path / "test.y4m"
    write_y4m(ref_path, ref)
    write_y4m(test_path, test)
    return ref_path, test_path


class TestMetricsCommand:
    def test_identical_pair(self, tmp_path, rng):
        ref, test = write_pair(tmp_path, rng)
        out = tmp_path / "report.json"
        rc = main(["metrics", str(ref), str(test), "--output", str(out), "--quiet"])
        assert rc == 0
        doc = json.loads(out.read_text())
        psnr_y = next(
            m for m in doc["results"]["metrics"] if m["metric"] == "PSNR_Y"
        )
        assert psnr_y["mean"] == 100.0
        assert psnr_y["clamp_applied"] is True
        assert doc["results"]["frame_count"] == 3
        assert doc["schema_version"] == 1

    def test_geometry_mismatch_exit_2(self, tmp_path, rng, capsys):
        ref, _ = write_pair(tmp_path, rng, width=32, height=32)
        info = make_info(16, 16)
        other = tmp_path / "other.y4m"
        write_y4m(other, [random_frame(info, rng)])
        rc = main(["metrics", str(ref), str(other), "--quiet"])
        assert rc == 2
        err = capsys.readouterr().err
        assert "32x32" in err and "16x16" in err

    def test_raw_without_geometry_flags_exit_2(self, tmp_path, rng, capsys):
        raw = tmp_path / "clip.yuv"
        raw.write_bytes(bytes(64 * 64 * 3 // 2))
        rc = main(["metrics", str(raw), str(raw), "--quiet"])
        assert rc == 2
        err = capsys.readouterr().err
        for flag in ("--width", "--height", "--bit-depth", "--fps"):
            assert flag in err

    def test_raw_with_flags(self, tmp_path):
        raw = tmp_path / "clip.yuv"
        raw.write_bytes(bytes(64 * 64 * 3 // 2 * 2))
        out = tmp_path / "report.json"
        rc = main([
            "metrics", str(raw), str(raw),
            "--width", "64", "--height", "64", "--bit-depth", "8", "--fps", "50",
            "--metrics", "psnr_y", "--output", str(out), "--quiet",
        ])
        assert rc == 0
        doc = json.loads(out.read_text())
        assert doc["results"]["frame_count"] == 2

    def test_malformed_header_exit_3(self, tmp_path, rng):
        bad = tmp_path / "bad.y4m"
        bad.write_bytes(b"YUV4MPEG2 W0 H64 F25:1 C420\n")
        ref, _ = write_pair(tmp_path, rng)
        assert main(["metrics", str(bad), str(ref), "--quiet"]) == 3

    def test_missing_file_exit_2(self, tmp_path, rng):
        ref, _ = write_pair(tmp_path, rng)
        assert main(["metrics", str(ref), str(tmp_path / "nope.y4m"), "--quiet"]) == 2

    def test_per_frame_csv(self, tmp_path, rng):
        ref, test = write_pair(tmp_path, rng, delta=1)
        per_frame = tmp_path / "frames.csv"
        rc = main([
            "metrics", str(ref), str(test), "--metrics", "psnr_y",
            "--per-frame", str(per_frame), "--output", str(tmp_path / "r.json"),
            "--quiet",
        ])
        assert rc == 0
        lines = per_frame.read_text().strip().splitlines()
        assert lines[0] == "frame,PSNR_Y"
        assert len(lines) == 4

    def test_external_scores_attached(self, tmp_path, rng):
        ref, test = write_pair(tmp_path, rng)
        vmaf = tmp_path / "vmaf.json"
        vmaf.write_text(json.dumps({
            "frames": [{"metrics": {"vmaf": v}} for v in (90.0, 92.0, 94.0)]
        }))
        out = tmp_path / "report.json"
        rc = main([
            "metrics", str(ref), str(test), "--metrics", "psnr_y",
            "--external", str(vmaf), "--output", str(out), "--quiet",
        ])
        assert rc == 0
        doc = json.loads(out.read_text())
        ext = next(
            m for m in doc["results"]["metrics"] if m["metric"] == "EXTERNAL:vmaf"
        )
        assert ext["mean"] == 92.0

    def test_deterministic_outputs(self, tmp_path, rng):
        ref, test = write_pair(tmp_path, rng, delta=2)
        out_a, out_b = tmp_path / "a.json", tmp_path / "b.json"
        argv = ["metrics", str(ref), str(test), "--quiet"]
        assert main(argv + ["--output", str(out_a)]) == 0
        assert main(argv + ["--output", str(out_b)]) == 0
        a = out_a.read_text().replace("a.json", "X")
        b = out_b.read_text().replace("b.json", "X")
        assert a == b

    def test_csv_format(self, tmp_path, rng):
        ref, test = write_pair(tmp_path, rng)
        out = tmp_path / "report.csv"
        rc = main([
            "metrics", str(ref), str(test), "--metrics", "psnr_y",
            "--format", "csv", "--output", str(out), "--quiet",
        ])
        assert rc == 0
        assert out.read_text().splitlines()[0] == "metric,mean,frames,clamp_applied"

    def test_ten_bit_pair(self, tmp_path, rng):
        ref, test = write_pair(tmp_path, rng, bit_depth=10, delta=1)
        out = tmp_path / "report.json"
        rc = main([
            "metrics", str(ref), str(test), "--output", str(out), "--quiet",
        ])
        assert rc == 0
        doc = json.loads(out.read_text())
        assert doc["results"]["geometry"]["bit_depth"] == 10
        psnr_y = next(
            m for m in doc["results"]["metrics"] if m["metric"] == "PSNR_Y"
        )
        assert psnr_y["mean"] == pytest.approx(60.1975, abs=1e-3)

    def test_report_to_stdout(self, tmp_path, rng, capsys):
        ref, test = write_pair(tmp_path, rng)
        rc = main(["metrics", str(ref), str(test), "--metrics", "psnr_y"])
        assert rc == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["results"]["frame_count"] == 3

    def test_report_embeds_decision_notes(self, tmp_path, rng):
        ref, test = write_pair(tmp_path, rng)
        out = tmp_path / "report.json"
        main(["metrics", str(ref), str(test), "--output", str(out), "--quiet"])
        notes = " ".join(json.loads(out.read_text())["notes"])
        assert "100" in notes and "SSIM" in notes


def write_rd_csv(path, rows):
    path.write_text(RD_HEADER + "".join(rows))


class TestBdrateCommand:
    def test_identical_pair_zero(self, tmp_path):
        points = tmp_path / "points.csv"
        rows = []
        for rate, quality in [(1000, 30), (2000, 35), (4000, 40)]:
            rows.append(f"HM,s1,PSNR,,{rate},{quality}\n")
            rows.append(f"VTM,s1,PSNR,,{rate},{quality}\n")
        write_rd_csv(points, rows)
        out = tmp_path / "bd.json"
        rc = main([
            "bdrate", str(points), "--anchor", "HM", "--test", "VTM",
            "--output", str(out), "--quiet",
        ])
        assert rc == 0
        doc = json.loads(out.read_text())
        assert doc["results"]["deltas"][0]["bd_rate_percent"] == 0.0
        assert doc["results"]["averages"][0]["bd_rate_percent"] == 0.0

    def test_average_row_is_mean(self, tmp_path):
        points = tmp_path / "points.csv"
        rows = []
        for rate, quality in [(1000, 30), (2000, 35), (4000, 40)]:
            rows.append(f"HM,s1,PSNR,,{rate},{quality}\n")
            rows.append(f"VTM,s1,PSNR,,{rate * 0.9},{quality}\n")
            rows.append(f"HM,s2,PSNR,,{rate},{quality}\n")
            rows.append(f"VTM,s2,PSNR,,{rate * 0.7},{quality}\n")
        write_rd_csv(points, rows)
        out = tmp_path / "bd.json"
        rc = main([
            "bdrate", str(points), "--anchor", "HM", "--test", "VTM",
            "--output", str(out), "--quiet", "--full-precision",
        ])
        assert rc == 0
        doc = json.loads(out.read_text())
        deltas = {d["sequence"]: d["bd_rate_percent"] for d in doc["results"]["deltas"]}
        assert deltas["s1"] == pytest.approx(-10.0, abs=1e-9)
        assert deltas["s2"] == pytest.approx(-30.0, abs=1e-9)
        assert doc["results"]["averages"][0]["bd_rate_percent"] == pytest.approx(
            -20.0, abs=1e-9
        )

    def test_orphan_curves_exit_2(self, tmp_path, capsys):
        points = tmp_path / "points.csv"
        write_rd_csv(points, [
            "HM,s1,PSNR,,1000,30\n",
            "HM,s1,PSNR,,2000,35\n",
            "HM,s1,PSNR,,4000,40\n",
        ])
        rc = main(["bdrate", str(points), "--anchor", "HM", "--test", "VTM", "--quiet"])
        assert rc == 2
        assert "s1" in capsys.readouterr().err

    def test_plot_data(self, tmp_path):
        points = tmp_path / "points.csv"
        rows = []
        for rate, quality in [(1000, 30), (2000, 35), (4000, 40)]:
            rows.append(f"HM,s1,PSNR,,{rate},{quality}\n")
            rows.append(f"VTM,s1,PSNR,,{rate * 0.8},{quality}\n")
        write_rd_csv(points, rows)
        plot = tmp_path / "plot.csv"
        rc = main([
            "bdrate", str(points), "--anchor", "HM", "--test", "VTM",
            "--plot-data", str(plot), "--output", str(tmp_path / "bd.json"),
            "--quiet",
        ])
        assert rc == 0
        lines = plot.read_text().strip().splitlines()
        assert lines[0] == "codec,sequence,metric,quality,log10_rate_kbps,interpolated"
        flags = {line.split(",")[-1] for line in lines[1:]}
        assert flags == {"0", "1"}


def write_panel(tmp_path, reversed_subject=False):
    scores = tmp_path / "scores.csv"
    stimuli = ["p1", "p2", "p3", "p4"]
    lines = ["subject," + ",".join(stimuli) + "\n"]
    base = [20.0, 40.0, 60.0, 80.0]
    for i in range(9):
        lines.append(f"s{i}," + ",".join(str(v + i) for v in base) + "\n")
    if reversed_subject:
        lines.append("s9," + ",".join(str(100 - v) for v in base) + "\n")
    else:
        lines.append("s9," + ",".join(str(v + 9) for v in base) + "\n")
    scores.write_text("".join(lines))

    meta = tmp_path / "meta.csv"
    meta.write_text(
        "pvs,codec,resolution,bitrate_kbps,content\n"
        "p1,HM,HD,1000,CrowdRun\n"
        "p2,VTM,HD,1000,CrowdRun\n"
        "p3,HM,HD,3000,Drums\n"
        "p4,VTM,HD,3000,Drums\n"
    )
    return scores, meta


class TestMosCommand:
    def test_consistent_panel(self, tmp_path):
        scores, meta = write_panel(tmp_path)
        out = tmp_path / "mos.json"
        rc = main([
            "mos", str(scores), "--pvs-meta", str(meta),
            "--output", str(out), "--quiet",
        ])
        assert rc == 0
        doc = json.loads(out.read_text())
        assert doc["results"]["screening"]["discarded"] == []
        factors = {row["factor"] for row in doc["results"]["anova"]}
        assert {"codec", "bitrate", "content"} <= factors
        assert len(doc["results"]["mos"]) == 4

    def test_reversed_subject_listed(self, tmp_path):
        scores, meta = write_panel(tmp_path, reversed_subject=True)
        out = tmp_path / "mos.json"
        rc = main([
            "mos", str(scores), "--pvs-meta", str(meta),
            "--output", str(out), "--quiet",
        ])
        assert rc == 0
        doc = json.loads(out.read_text())
        assert doc["results"]["screening"]["discarded"] == ["s9"]
        assert all(p["n"] == 9 for p in doc["results"]["mos"])

    def test_missing_metadata_exit_2(self, tmp_path, capsys):
        scores, meta = write_panel(tmp_path)
        meta.write_text(
            "pvs,codec,resolution,bitrate_kbps,content\n"
            "p1,HM,HD,1000,CrowdRun\n"
        )
        rc = main(["mos", str(scores), "--pvs-meta", str(meta), "--quiet"])
        assert rc == 2
        assert "p2" in capsys.readouterr().err

    def test_too_few_subjects_exit_2(self, tmp_path):
        scores = tmp_path / "scores.csv"
        scores.write_text("subject,p1,p2,p3\ns0,10,20,30\ns1,11,21,31\n")
        meta = tmp_path / "meta.csv"
        meta.write_text(
            "pvs,codec,resolution,bitrate_kbps,content\n"
            "p1,HM,HD,1000,c\np2,VTM,HD,1000,c\np3,HM,HD,2000,c\n"
        )
        assert main(["mos", str(scores), "--pvs-meta", str(meta), "--quiet"]) == 2

    def test_exclude_stimulus(self, tmp_path):
        scores, meta = write_panel(tmp_path)
        out = tmp_path / "mos.json"
        rc = main([
            "mos", str(scores), "--pvs-meta", str(meta), "--exclude", "p4",
            "--output", str(out), "--quiet",
        ])
        assert rc == 0
        doc = json.loads(out.read_text())
        assert [p["pvs"] for p in doc["results"]["mos"]] == ["p1", "p2", "p3"]


CALLGRIND = """\
# profile
version: 1
events: Ir
fl=(1) enc.cpp
fn=(1) InterSearch::xTZSearch
10 700
11 50
cfn=(2) TrQuant::transformNxN
calls=2 20
12 900
fn=(2) TrQuant::transformNxN
20 250
"""


class TestProfileCommand:
    def test_stage_percentages(self, tmp_path):
        prof = tmp_path / "callgrind.out"
        prof.write_text(CALLGRIND)
        out = tmp_path / "profile.json"
        rc = main(["profile", str(prof), "--output", str(out), "--quiet"])
        assert rc == 0
        doc = json.loads(out.read_text())
        stages = {s["stage"]: s["percent"] for s in doc["results"]["profiles"][0]["stages"]}
        assert stages == {"ME": 75.0, "Tr/Inv.Tr": 25.0}
        assert sum(stages.values()) == pytest.approx(100.0, abs=0.01)

    def test_speedup_rows_from_timing(self, tmp_path):
        prof = tmp_path / "callgrind.out"
        prof.write_text(CALLGRIND)
        timing = tmp_path / "timing.csv"
        timing.write_text(
            TIMING_HEADER
            + "HM,CrowdRun,32,123,500,50,1\n"
            + "VTM,CrowdRun,32,414,500,50,1\n"
        )
        out = tmp_path / "profile.json"
        rc = main([
            "profile", str(prof), "--timing", str(timing),
            "--output", str(out), "--quiet", "--full-precision",
        ])
        assert rc == 0
        doc = json.loads(out.read_text())
        speedups = doc["results"]["timing"]["speedups"]
        assert len(speedups) == 1
        assert speedups[0]["speedup_a_over_b"] == pytest.approx(12.3 / 41.4)

    def test_pie_data(self, tmp_path):
        prof = tmp_path / "callgrind.out"
        prof.write_text(CALLGRIND)
        pie = tmp_path / "pie.csv"
        rc = main([
            "profile", str(prof), "--pie-data", str(pie),
            "--output", str(tmp_path / "p.json"), "--quiet",
        ])
        assert rc == 0
        lines = pie.read_text().strip().splitlines()
        assert lines[0] == "stage,percent"
        assert len(lines) == 3

    def test_custom_mapping(self, tmp_path):
        prof = tmp_path / "callgrind.out"
        prof.write_text(CALLGRIND)
        mapping = tmp_path / "map.txt"
        mapping.write_text("TZSearch -> Search\n")
        out = tmp_path / "profile.json"
        rc = main([
            "profile", str(prof), "--mapping", str(mapping),
            "--output", str(out), "--quiet",
        ])
        assert rc == 0
        doc = json.loads(out.read_text())
        stages = {s["stage"] for s in doc["results"]["profiles"][0]["stages"]}
        assert stages == {"Search", "Other"}

    def test_bad_mapping_exit_3(self, tmp_path):
        prof = tmp_path / "callgrind.out"
        prof.write_text(CALLGRIND)
        mapping = tmp_path / "map.txt"
        mapping.write_text("this line has no arrow\n")
        assert main(["profile", str(prof), "--mapping", str(mapping), "--quiet"]) == 3

    def test_mapping_from_environment(self, tmp_path, monkeypatch):
        prof = tmp_path / "callgrind.out"
        prof.write_text(CALLGRIND)
        mapping = tmp_path / "map.txt"
        mapping.write_text("TZSearch -> EnvSearch\n")
        monkeypatch.setenv("CODECBENCH_STAGE_MAP", str(mapping))
        out = tmp_path / "profile.json"
        rc = main(["profile", str(prof), "--output", str(out), "--quiet"])
        assert rc == 0
        doc = json.loads(out.read_text())
        stages = {s["stage"] for s in doc["results"]["profiles"][0]["stages"]}
        assert "EnvSearch" in stages
        assert doc["results"]["mapping"] == str(mapping)

    def test_malformed_callgrind_exit_3(self, tmp_path, capsys):
        prof = tmp_path / "callgrind.out"
        prof.write_text("events: Ir\nfl=a.c\nfn=foo\n1 banana\n")
        assert main(["profile", str(prof), "--quiet"]) == 3
        assert "line 4" in capsys.readouterr().err


class TestRounding:
    def test_six_significant_digits(self):
        doc = round_floats({"x": 48.13080360867913, "nested": [1.23456789e-7]})
        assert doc["x"] == 48.1308
        assert doc["nested"][0] == 1.23457e-7

    def test_ints_and_bools_untouched(self):
        doc = round_floats({"n": 12345678, "flag": True})
        assert doc["n"] == 12345678
        assert doc["flag"] is True

    def test_non_finite_floats_serialize_as_strings(self):
        import math

        from codecbench.report import render_json

        text = render_json({"f": math.inf, "list": [math.nan]})
        doc = json.loads(text)
        assert doc["f"] == "inf"
        assert doc["list"][0] == "nan"
