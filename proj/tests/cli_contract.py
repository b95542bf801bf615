"""Black-box checks of the vistr command line: exit codes, determinism,
JSON output against the published schemas, and CLI/API agreement.

Usage: cli_contract.py <vistr binary> <schema dir>
"""

import json
import os
import re
import shutil
import subprocess
import sys
import tempfile
import time
import unittest
import urllib.error
import urllib.request
from pathlib import Path

import jsonschema

VISTR = ""
SCHEMAS = Path()
GOLDEN = "There is a two-peak price trend in Apple during March."


def run(*args, env=None, check=None):
    proc = subprocess.run([VISTR, *map(str, args)], capture_output=True, text=True, env=env, timeout=600)
    if check is not None and proc.returncode != check:
        raise AssertionError(f"{args}: exit {proc.returncode}, stderr: {proc.stderr}")
    return proc


def run_json(*args, schema, env=None):
    proc = run(*args, "--json", env=env, check=0)
    doc = json.loads(proc.stdout)  # raises if anything else shares stdout
    validate(doc, schema)
    return doc


def validate(doc, schema):
    with open(SCHEMAS / f"{schema}.schema.json") as f:
        jsonschema.validate(doc, json.load(f))


class Contract(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp = Path(tempfile.mkdtemp(prefix="vistr-cli-"))
        cls.planted = cls.tmp / "planted.csv"
        run_json("gen-synth", "--kind", "planted-patterns", "--start-date", "2021-02-09",
                 "--out", cls.planted, schema="gen_synth")
        cls.db = cls.tmp / "db"
        cls.summary = run_json("ingest", "--csv", cls.planted, "--db", cls.db, schema="ingest_summary")
        cls.env = dict(os.environ, VISTR_DB=str(cls.db))

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.tmp, ignore_errors=True)

    def test_gen_synth_is_byte_deterministic(self):
        a, b = self.tmp / "a.csv", self.tmp / "b.csv"
        for out in (a, b):
            run("gen-synth", "--kind", "random-walk", "--rows", 1000, "--vars", 1, "--seed", 7, "--out", out, check=0)
        self.assertEqual(a.read_bytes(), b.read_bytes())
        self.assertEqual(len(a.read_text().splitlines()), 1001)

    def test_planted_manifest_lists_windows(self):
        manifest = json.loads(self.planted.with_suffix(".manifest.json").read_text())
        kinds = [w["category"] for w in manifest["windows"]]
        self.assertEqual(kinds.count("two-peak"), 10)
        self.assertEqual(kinds.count("valley"), 2)

    def test_ingest_summary_and_exit_codes(self):
        self.assertEqual(self.summary["table_id"], "planted")
        self.assertLessEqual(self.summary["refs_retained"], self.summary["refs_generated"])
        self.assertEqual(run("ingest", "--csv", self.tmp / "missing.csv", "--db", self.tmp / "x").returncode, 1)
        bad = self.tmp / "bad.csv"
        bad.write_text("date,v\n2021-01-01,1\n2021-01-02,oops\n")
        proc = run("ingest", "--csv", bad, "--db", self.tmp / "x")
        self.assertEqual(proc.returncode, 2)
        self.assertIn("ParseError", proc.stderr)

    def test_larger_threshold_retains_no_more(self):
        csv = self.tmp / "walk.csv"
        run("gen-synth", "--kind", "random-walk", "--rows", 300, "--seed", 3, "--out", csv, check=0)
        retained = {}
        for t in (0.5, 1.5):
            s = run_json("ingest", "--csv", csv, "--db", self.tmp / f"t{t}", "--threshold", t, schema="ingest_summary")
            retained[t] = s["refs_retained"]
        self.assertLessEqual(retained[1.5], retained[0.5])

    def test_golden_query_through_env_db(self):
        doc = run_json("query", "--text", "What is the price trend of Apple during March?", schema="answer", env=self.env)
        self.assertEqual(doc["answer"], GOLDEN)
        human = run("query", "--text", "What is the price trend of Apple during March?", env=self.env, check=0)
        self.assertIn(GOLDEN, human.stdout)

    def test_query_exit_codes(self):
        proc = run("query", "--text", "Why did Apple stock rise in March?", "--json", env=self.env)
        self.assertEqual(proc.returncode, 3)
        self.assertEqual(proc.stdout, "")
        self.assertIn("UnsupportedQueryError", proc.stderr)
        self.assertEqual(run("query", "--text", "What is the trend of Microsoft?", env=self.env).returncode, 2)
        self.assertEqual(run("query", env=self.env).returncode, 2)  # neither text nor sketch
        self.assertEqual(run("query", "--db", self.tmp / "nowhere", "--text", "Describe the data").returncode, 1)

    def test_sketch_query(self):
        images = sorted((self.db / "planted" / "images").glob("*.png"))
        self.assertTrue(images)
        doc = run_json("query", "--sketch", images[0], "-k", 3, schema="answer", env=self.env)
        self.assertEqual(doc["plan"]["intent"], "SimilarToImage")
        self.assertEqual(len(doc["matches"]), 3)
        spans = {(m["start_idx"], m["end_idx"]) for m in doc["matches"]}
        self.assertEqual(len(spans), 3)

    def test_patterns(self):
        doc = run_json("patterns", schema="patterns", env=self.env)
        self.assertEqual(sum(g["count"] for g in doc["groups"]), self.summary["refs_retained"])

    def test_alignment_commands(self):
        data = self.tmp / "triplets"
        run_json("gen-synth", "--kind", "triplets", "--per-category", 10, "--out", data, schema="gen_synth")
        head = self.tmp / "head.bin"
        train = run_json("align-train", "--data", data, "--out", head, "--epochs", 3, schema="align_train")
        self.assertEqual(len(train["loss_trace"]), 3)
        self.assertTrue(head.exists())
        run_json("align-eval", "--data", data, "--head", head, schema="align_eval")
        self.assertEqual(run("align-train", "--data", data, "--out", head, "--lr", "inf").returncode, 2)

    def test_bench(self):
        empty = run_json("bench", "--n", 0, schema="bench")
        self.assertEqual(empty["queries"], 0)
        ann = run_json("bench", "--n", 3000, "--mode", "ann", "--queries", 50, schema="bench")
        self.assertGreaterEqual(ann["recall_at_1"], 0.95)

    def test_cli_and_api_agree(self):
        server = subprocess.Popen([VISTR, "serve", "--db", self.db, "--port", "0"], stderr=subprocess.PIPE, text=True)
        try:
            line = server.stderr.readline()
            port = int(re.search(r":(\d+)\s*$", line).group(1))
            base = f"http://127.0.0.1:{port}"
            for _ in range(50):
                try:
                    urllib.request.urlopen(base + "/api/health", timeout=2)
                    break
                except OSError:
                    time.sleep(0.1)
            for text in ("What is the price trend of Apple during March?", "Where are the two peaks in Apple?",
                         "Describe the data"):
                req = urllib.request.Request(f"{base}/api/tables/planted/query", data=json.dumps({"text": text}).encode(),
                                             headers={"Content-Type": "application/json"})
                api = json.loads(urllib.request.urlopen(req, timeout=30).read())
                validate(api, "answer")
                cli = run_json("query", "--text", text, schema="answer", env=self.env)
                self.assertEqual(api, cli, text)
            api = json.loads(urllib.request.urlopen(f"{base}/api/tables/planted/patterns", timeout=30).read())
            self.assertEqual(api["groups"], run_json("patterns", schema="patterns", env=self.env)["groups"])
            req = urllib.request.Request(f"{base}/api/tables/planted/query",
                                         data=json.dumps({"text": "Why did Apple rise?"}).encode(),
                                         headers={"Content-Type": "application/json"})
            with self.assertRaises(urllib.error.HTTPError) as err:
                urllib.request.urlopen(req, timeout=30)
            self.assertEqual(err.exception.code, 422)
            body = json.loads(err.exception.read())
            validate(body, "error")
            self.assertEqual(body["code"], "UnsupportedQueryError")
        finally:
            server.terminate()
            server.wait(timeout=30)
            server.stderr.close()


if __name__ == "__main__":
    VISTR, SCHEMAS = sys.argv[1], Path(sys.argv[2])
    unittest.main(argv=sys.argv[:1], verbosity=2)
