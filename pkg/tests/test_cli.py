import pytest

from attrid.cli import main, sweep_grid
from attrid.evaluation import load_run
from attrid.ltr import LinearModel
from attrid.synthetic import synonym_collection


@pytest.fixture
def mini(data_dir, vectors_file, tmp_path):
    qrels = tmp_path / "qrels.txt"
    qrels.write_text("q1 0 spouse 2\nq1 0 party 1\nq1 0 deathPlace 0\n")
    return {
        "kb": str(data_dir / "mini.kb.tsv"),
        "vectors": str(vectors_file),
        "taxonomy": str(data_dir / "taxonomy.tsv"),
        "annotations": str(data_dir / "annotations.tsv"),
        "qrels": str(qrels),
    }


@pytest.fixture(scope="module")
def synth(tmp_path_factory):
    coll = synonym_collection(n_queries=20, n_entities=15, seed=3)
    return coll.write(tmp_path_factory.mktemp("synth"))


def run_cli(*argv):
    return main([str(a) for a in argv])


class TestRank:
    def test_mrf_fixture(self, mini, tmp_path):
        out = tmp_path / "mrf.run"
        assert run_cli("rank", "--method", "mrf", "--kb", mini["kb"], "--vectors", mini["vectors"],
                       "--annotations", mini["annotations"], "--out", out) == 0
        run = load_run(out)
        assert run.tag == "mrf"
        assert run.attributes("q1")[0] == "spouse"
        assert sorted(run.attributes("q1")) == ["deathPlace", "party", "spouse"]

    @pytest.mark.parametrize("method", ["bm25", "lm", "mlm"])
    def test_baselines_with_index(self, mini, tmp_path, method):
        idx = tmp_path / "idx.bin"
        assert run_cli("index", "--kb", mini["kb"], "--out", idx) == 0
        a, b = tmp_path / "a.run", tmp_path / "b.run"
        common = ["--method", method, "--kb", mini["kb"], "--annotations", mini["annotations"]]
        assert run_cli("rank", *common, "--index", idx, "--out", a) == 0
        assert run_cli("rank", *common, "--out", b) == 0
        assert a.read_text() == b.read_text()
        assert load_run(a).tag == method

    def test_stdout_and_depth(self, mini, capsys):
        assert run_cli("rank", "--method", "bm25", "--kb", mini["kb"], "--annotations", mini["annotations"], "--depth", 1) == 0
        lines = capsys.readouterr().out.splitlines()
        # no term matches a Lincoln document: all scores 0, name order decides
        assert lines == ["q1 Q0 deathPlace 1 0.000000 bm25"]

    def test_queries_with_dictionary_linker(self, mini, tmp_path, capsys):
        q = tmp_path / "q.tsv"
        q.write_text("q1\twife of lincoln\n")
        assert run_cli("rank", "--method", "mrf", "--kb", mini["kb"], "--vectors", mini["vectors"], "--queries", q) == 0
        assert capsys.readouterr().out.split()[2] == "spouse"

    def test_deterministic_on_synthetic(self, synth, tmp_path):
        outs = []
        for n in range(2):
            p = tmp_path / f"r{n}.run"
            assert run_cli("rank", "--method", "mrf", "--kb", synth["kb"], "--vectors", synth["vectors"],
                           "--annotations", synth["annotations"], "--out", p) == 0
            outs.append(p.read_bytes())
        assert outs[0] == outs[1] and outs[0]

    def test_sweep(self, mini, tmp_path, capsys):
        out = tmp_path / "best.run"
        assert run_cli("rank", "--method", "mrf", "--sweep", "--kb", mini["kb"], "--vectors", mini["vectors"],
                       "--annotations", mini["annotations"], "--qrels", mini["qrels"], "--out", out) == 0
        cap = capsys.readouterr()
        assert len(cap.out.splitlines()) == 1 + len(list(sweep_grid()))
        assert cap.err.startswith("best: lambda=")
        assert load_run(out).attributes("q1")

    def test_sweep_grid(self):
        grid = list(sweep_grid())
        assert len(grid) == 66 * 25
        assert all(abs(l1 + l2 + l3 - 1) < 1e-9 and l3 >= 0 for l1, l2, l3, _, _ in grid)


class TestUsageErrors:
    def test_unknown_method(self, mini):
        with pytest.raises(SystemExit) as exc:
            run_cli("rank", "--method", "tfidf", "--kb", mini["kb"], "--annotations", mini["annotations"])
        assert exc.value.code == 2

    def test_conflicting_inputs(self, mini, tmp_path, capsys):
        q = tmp_path / "q.tsv"
        q.write_text("q1\tlincoln\n")
        with pytest.raises(SystemExit) as exc:
            run_cli("rank", "--method", "bm25", "--kb", mini["kb"], "--annotations", mini["annotations"], "--queries", q)
        assert exc.value.code == 2
        assert "mutually exclusive" in capsys.readouterr().err

    def test_sweep_needs_mrf(self, mini):
        with pytest.raises(SystemExit):
            run_cli("rank", "--method", "lm", "--sweep", "--kb", mini["kb"], "--annotations", mini["annotations"])

    def test_missing_kb(self, mini):
        with pytest.raises(SystemExit):
            run_cli("rank", "--method", "lm", "--annotations", mini["annotations"])

    def test_bad_input_file(self, tmp_path, mini, capsys):
        bad = tmp_path / "bad.kb"
        bad.write_text("a\tb\n")
        assert run_cli("rank", "--method", "lm", "--kb", bad, "--annotations", mini["annotations"]) == 1
        err = capsys.readouterr().err
        assert err.startswith("attrid: error:") and ":1:" in err


class TestConfig:
    def test_config_and_override(self, mini, tmp_path, capsys):
        cfg = tmp_path / "conf" / "attrid.toml"
        cfg.parent.mkdir()
        (cfg.parent / "kb.tsv").write_text(open(mini["kb"]).read())
        cfg.write_text(f'kb = "kb.tsv"\nannotations = "{mini["annotations"]}"\ndepth = 1\n')
        assert run_cli("rank", "--method", "bm25", "--config", cfg) == 0
        assert len(capsys.readouterr().out.splitlines()) == 1
        assert run_cli("rank", "--method", "bm25", "--config", cfg, "--depth", 3) == 0
        assert len(capsys.readouterr().out.splitlines()) == 3


class TestTrain:
    def test_train_and_rank_ltr(self, synth, tmp_path, capsys):
        files = ["--kb", synth["kb"], "--vectors", synth["vectors"], "--taxonomy", synth["taxonomy"],
                 "--annotations", synth["annotations"]]
        models = []
        for n in range(2):
            m = tmp_path / f"m{n}.cav"
            assert run_cli("train", *files, "--qrels", synth["qrels"], "--restarts", 1, "--seed", 7, "--out", m,
                           "--dump-features", tmp_path / "f.txt", "--run-out", tmp_path / "cv.run") == 0
            models.append(m.read_bytes())
        assert models[0] == models[1]
        table = capsys.readouterr().out.splitlines()
        assert table[0].startswith("fold\tqueries\tNDCG@5") and table[-1].startswith("all\t20\t")
        assert set(load_run(tmp_path / "cv.run").rankings) == {f"sq{i:03d}" for i in range(20)}
        model = LinearModel.load(tmp_path / "m0.cav")
        assert abs(abs(model.weights).sum() - 1) < 1e-12
        assert model.metadata["folds"] == "5"

        a, b = tmp_path / "a.run", tmp_path / "b.run"
        assert run_cli("rank-ltr", "--model", tmp_path / "m0.cav", *files, "--out", a) == 0
        assert run_cli("rank-ltr", "--model", tmp_path / "m0.cav", "--features", tmp_path / "f.txt", "--out", b) == 0
        assert load_run(a).rankings.keys() == load_run(b).rankings.keys()
        for qid, ranking in load_run(a).rankings.items():
            assert [x for x, _ in ranking] == load_run(b).attributes(qid)

    def test_ablation_from_dump(self, synth, tmp_path, capsys):
        dump = tmp_path / "f.txt"
        assert run_cli("train", "--kb", synth["kb"], "--vectors", synth["vectors"], "--annotations", synth["annotations"],
                       "--qrels", synth["qrels"], "--restarts", 1, "--out", tmp_path / "m.cav", "--dump-features", dump) == 0
        capsys.readouterr()
        assert run_cli("train", "--features", dump, "--restarts", 1, "--out", tmp_path / "m2.cav", "--ablation") == 0
        out = capsys.readouterr().out
        rows = out.split("feature\tNDCG@5\tdelta%\n")[1].splitlines()
        assert rows[0].startswith("f1-f7\t") and rows[0].endswith("\t0.00%")
        assert len(rows) == 8

    def test_features_conflict(self, synth, tmp_path):
        with pytest.raises(SystemExit):
            run_cli("train", "--features", tmp_path / "x", "--annotations", synth["annotations"], "--out", tmp_path / "m")


class TestEvaluate:
    def _runs(self, synth, tmp_path):
        paths = []
        for method in ("bm25", "mrf"):
            p = tmp_path / f"{method}.run"
            assert run_cli("rank", "--method", method, "--kb", synth["kb"], "--vectors", synth["vectors"],
                           "--annotations", synth["annotations"], "--out", p) == 0
            paths.append(p)
        return paths

    def test_table(self, synth, tmp_path, capsys):
        bm25, mrf = self._runs(synth, tmp_path)
        cats = tmp_path / "cats.tsv"
        cats.write_text("".join(f"sq{i:03d}\t{'even' if i % 2 == 0 else 'odd'}\n" for i in range(20)))
        assert run_cli("evaluate", bm25, mrf, "--qrels", synth["qrels"], "--matrix", "--categories", cats) == 0
        out = capsys.readouterr().out
        lines = out.splitlines()
        assert lines[0].split() == ["run", "NDCG@5", "P@5", "MRR", "MAP"]
        assert lines[1].startswith("bm25") and lines[2].startswith("mrf")
        assert "*" in lines[2] and "*" not in lines[1]
        assert "paired t-test p-values" in out and "even" in out and "odd" in out

    def test_baseline_choice(self, synth, tmp_path, capsys):
        bm25, mrf = self._runs(synth, tmp_path)
        assert run_cli("evaluate", bm25, mrf, "--qrels", synth["qrels"], "--baseline", "mrf") == 0
        assert "over mrf" in capsys.readouterr().out
        with pytest.raises(SystemExit):
            run_cli("evaluate", bm25, "--qrels", synth["qrels"], "--baseline", "nope")


class TestPoolAndKappa:
    def test_pool(self, mini, tmp_path, capsys):
        rel = tmp_path / "rel.tsv"
        rel.write_text("q1\tWashington\nq1\tMary_Todd\n")
        assert run_cli("pool", "--kb", mini["kb"], "--annotations", mini["annotations"], "--relevant", rel) == 0
        assert capsys.readouterr().out == "q1\tdeathPlace\nq1\tspouse\n"

    def test_kappa(self, tmp_path, capsys):
        labels = tmp_path / "labels.tsv"
        labels.write_text("i1\t1\t0\ni2\t1\t1\n")
        assert run_cli("kappa", labels) == 0
        assert float(capsys.readouterr().out) == pytest.approx(-1 / 3, abs=1e-6)
