#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <sys/wait.h>

namespace {

namespace fs = std::filesystem;

std::string cli() { return KPSEQ_CLI_PATH; }

int run_cmd(const std::string& args, const std::string& log) {
  std::string cmd = cli() + " " + args + " >" + log + " 2>&1";
  int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return s;
}

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / "kpseq_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("usage errors exit 1") {
  Workspace ws;
  CHECK(run_cmd("train --order sideways --data x --out y", ws.path("log1")) == 1);
  std::string log = slurp(ws.path("log1"));
  CHECK(log.find("appear-ap") != std::string::npos);  // lists the valid orderings
  CHECK(run_cmd("frobnicate", ws.path("log2")) == 1);
  CHECK(run_cmd("decode --mode greedy --checkpoint a --data b --out c", ws.path("log3")) == 1);
  CHECK(run_cmd("--help", ws.path("log4")) == 0);
}

TEST_CASE("runtime errors exit 2") {
  Workspace ws;
  CHECK(run_cmd("preprocess --data /nonexistent.jsonl --out " + ws.path("v.txt"),
                ws.path("log")) == 2);
  CHECK(run_cmd("decode --checkpoint /nonexistent --data /nonexistent.jsonl --out " +
                    ws.path("p.jsonl"),
                ws.path("log")) == 2);
}

TEST_CASE("synth preprocess train decode eval stats pipeline") {
  Workspace ws;
  std::string data = ws.path("corpus.jsonl");
  CHECK(run_cmd("synth --out " + data +
                " --docs 8 --vocab-pool 40 --doc-len-min 8 --doc-len-max 12 "
                "--phrases-min 2 --phrases-max 3 --absent-frac 0.25 --seed 3",
                ws.path("log_synth")) == 0);
  REQUIRE(fs::exists(data));

  CHECK(run_cmd("preprocess --data " + data + " --out " + ws.path("vocab.txt") +
                " --max-size 500",
                ws.path("log_pre")) == 0);
  std::string vocab = slurp(ws.path("vocab.txt"));
  CHECK(vocab.rfind("<pad>\n<unk>\n<bos>\n<eos>\n<sep>\n", 0) == 0);

  std::string ckpt = ws.path("ckpt");
  CHECK(run_cmd("train --data " + data + " --out " + ckpt +
                " --order appear-ap --epochs 2 --batch-size 4 --seed 5 --eval-every 100",
                ws.path("log_train")) == 0);
  REQUIRE(fs::exists(ckpt + "/manifest.json"));
  REQUIRE(fs::exists(ckpt + "/params.bin"));
  REQUIRE(fs::exists(ckpt + "/vocab.txt"));

  std::string preds = ws.path("preds.jsonl");
  CHECK(run_cmd("decode --checkpoint " + ckpt + " --data " + data + " --out " + preds +
                " --beam 3 --max-len 12 --mode overgen",
                ws.path("log_decode")) == 0);
  REQUIRE(fs::exists(preds));

  std::string report = ws.path("report.md");
  CHECK(run_cmd("eval --pred " + preds + " --ref " + data + " --ks 5,10 --absent-ks 10,50 "
                "--format markdown --out " + report,
                ws.path("log_eval")) == 0);
  std::string md = slurp(report);
  CHECK(md.find("Present keyphrases") != std::string::npos);
  CHECK(md.find("F1@5") != std::string::npos);

  CHECK(run_cmd("stats --pred " + preds + " --out " + ws.path("stats.md"),
                ws.path("log_stats")) == 0);
  CHECK(slurp(ws.path("stats.md")).find("#(UniqKP)") != std::string::npos);

  // decode + eval are deterministic: a second run produces identical bytes,
  // and the worker count cannot change output order
  std::string preds2 = ws.path("preds2.jsonl");
  CHECK(run_cmd("decode --checkpoint " + ckpt + " --data " + data + " --out " + preds2 +
                " --beam 3 --max-len 12 --mode overgen",
                ws.path("log_decode2")) == 0);
  CHECK(slurp(preds) == slurp(preds2));
  std::string preds3 = ws.path("preds3.jsonl");
  {
    std::string cmd = "KPSEQ_THREADS=3 " + cli() + " decode --checkpoint " + ckpt + " --data " +
                      data + " --out " + preds3 + " --beam 3 --max-len 12 --mode overgen >" +
                      ws.path("log_decode3") + " 2>&1";
    int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    CHECK((WIFEXITED(status) ? WEXITSTATUS(status) : -1) == 0);
  }
  CHECK(slurp(preds) == slurp(preds3));
  std::string report2 = ws.path("report2.md");
  CHECK(run_cmd("eval --pred " + preds2 + " --ref " + data + " --ks 5,10 --absent-ks 10,50 "
                "--format markdown --out " + report2,
                ws.path("log_eval2")) == 0);
  CHECK(slurp(report) == slurp(report2));
}

TEST_CASE("compare emits a grid per cell") {
  Workspace ws;
  std::string data = ws.path("corpus.jsonl");
  REQUIRE(run_cmd("synth --out " + data +
                  " --docs 6 --vocab-pool 30 --doc-len-min 6 --doc-len-max 9 "
                  "--phrases-min 2 --phrases-max 2 --seed 11",
                  ws.path("log_synth")) == 0);
  std::string out = ws.path("cmp");
  CHECK(run_cmd("compare --data " + data + " --out " + out + " --train"
                " --orders alpha,no-sort --beams 2 --modes overgen,self-term "
                "--epochs 1 --batch-size 3 --seed 2 --eval-every 50 --max-len 10",
                ws.path("log_compare")) == 0);
  std::string md = slurp(out + "/compare_report.md");
  CHECK(md.find("overgen, beam width 2") != std::string::npos);
  CHECK(md.find("self-term, beam width 2") != std::string::npos);
  CHECK(md.find("| alpha |") != std::string::npos);
  CHECK(md.find("| no-sort |") != std::string::npos);
  CHECK(fs::exists(out + "/compare_report.csv"));
  CHECK(fs::exists(out + "/ckpt_alpha/params.bin"));
  CHECK(fs::exists(out + "/ckpt_no-sort/params.bin"));

  // without --train the existing checkpoints are reused, byte-identically
  CHECK(run_cmd("compare --data " + data + " --out " + out +
                " --orders alpha,no-sort --beams 2 --modes overgen,self-term "
                "--epochs 1 --batch-size 3 --seed 2 --eval-every 50 --max-len 10",
                ws.path("log_compare2")) == 0);
  CHECK(slurp(out + "/compare_report.md") == md);

  // a missing checkpoint is an error naming the ordering
  CHECK(run_cmd("compare --data " + data + " --out " + out +
                " --orders length --beams 2 --max-len 10",
                ws.path("log_compare3")) == 2);
  CHECK(slurp(ws.path("log_compare3")).find("length") != std::string::npos);
}

TEST_SUITE_END();
