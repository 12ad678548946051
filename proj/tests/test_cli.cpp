// End-to-end checks of the command-line tool: exit-code contract,
// deterministic outputs, and a miniature convert/vocab/train/predict/eval
// round trip on the bundled samples.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

namespace {

namespace fs = std::filesystem;

const std::string kCli = UNIMC_CLI_PATH;
const std::string kSamples = std::string(UNIMC_SAMPLE_DIR) + "/samples";
const std::string kSchemas = std::string(UNIMC_SAMPLE_DIR) + "/schemas";

fs::path work_dir() {
  static const fs::path dir = [] {
    fs::path p = fs::temp_directory_path() / "unimc_cli_tests";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

int run(const std::string& args, const std::string& capture = "") {
  std::string command = kCli + " " + args;
  if (!capture.empty()) command += " > " + capture + " 2>&1";
  const int rc = std::system(command.c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

TEST_CASE("usage errors exit 1, --help exits 0") {
  CHECK(run("--help", (work_dir() / "help.txt").string()) == 0);
  CHECK(run("convert --definitely-not-a-flag",
            (work_dir() / "junk.txt").string()) == 1);
  CHECK(run("no-such-command", (work_dir() / "junk.txt").string()) == 1);
}

TEST_CASE("convert is deterministic and reproduces the bundled goldens") {
  const fs::path out_a = work_dir() / "snli_a.mc.jsonl";
  const fs::path out_b = work_dir() / "snli_b.mc.jsonl";
  const std::string base = "convert --task nli3 --template table7_nli --in " + kSamples +
                           "/snli_mini.jsonl --dataset snli_mini";
  REQUIRE(run(base + " --out " + out_a.string()) == 0);
  REQUIRE(run(base + " --out " + out_b.string()) == 0);
  const std::string bytes = slurp(out_a);
  CHECK(bytes == slurp(out_b));
  CHECK(bytes.find("we can infer that The man is inside.") != std::string::npos);
  CHECK(bytes.find("it is difficult for us to infer that The man is inside.") !=
        std::string::npos);

  const fs::path siqa = work_dir() / "siqa.mc.jsonl";
  REQUIRE(run("convert --task native_mc --in " + kSamples +
              "/socialiqa_mini.jsonl --out " + siqa.string()) == 0);
  const std::string siqa_bytes = slurp(siqa);
  CHECK(siqa_bytes.find("\"answer\":2") != std::string::npos);
  CHECK(siqa_bytes.find("start the song") != std::string::npos);

  const fs::path sst = work_dir() / "sst.mc.jsonl";
  REQUIRE(run("convert --task sentiment --template great_terrible --schema " + kSchemas +
              "/sst2.map --in " + kSamples + "/sst2_mini.jsonl --out " + sst.string()) ==
          0);
  const std::string sst_bytes = slurp(sst);
  CHECK(sst_bytes.find("It's great") != std::string::npos);
  CHECK(sst_bytes.find("\"answer\":0") != std::string::npos);
  CHECK(sst_bytes.find("\"answer\":1") != std::string::npos);
}

TEST_CASE("convert does not mutate its input") {
  const fs::path input = work_dir() / "input_copy.jsonl";
  fs::copy_file(kSamples + "/agnews_mini.jsonl", input,
                fs::copy_options::overwrite_existing);
  const std::string before = slurp(input);
  REQUIRE(run("convert --task topic --template table7_agnews --in " + input.string() +
              " --out " + (work_dir() / "ag.mc.jsonl").string()) == 0);
  CHECK(slurp(input) == before);
}

TEST_CASE("bad data exits 2") {
  const fs::path bad = work_dir() / "bad.jsonl";
  std::ofstream(bad) << "{\"premise\":\"only premise\"}\n";
  CHECK(run("convert --task nli3 --template table7_nli --in " + bad.string() + " --out " +
            (work_dir() / "bad.mc.jsonl").string(),
            (work_dir() / "bad_err.txt").string()) == 2);
  CHECK(run("convert --task nli3 --template table7_nli --in /nonexistent.jsonl --out " +
            (work_dir() / "x.mc.jsonl").string(),
            (work_dir() / "noent.txt").string()) == 2);
}

TEST_CASE("miniature end-to-end: synth, vocab, train, predict, eval") {
  const fs::path dir = work_dir() / "e2e";
  const fs::path synth_tool = fs::path(kCli).parent_path() / "unimc_synth";
  REQUIRE(std::system((synth_tool.string() + " --out " + dir.string() +
                       " --copy-train 48 --nli-train 48 --topic-train 48"
                       " --copy-heldout 12 --nli-transfer 12 --topic-transfer 12"
                       " > /dev/null")
                          .c_str()) == 0);

  const fs::path vocab = dir / "vocab.txt";
  REQUIRE(run("build-vocab --in " + (dir / "corpus.txt").string() + " --out " +
              vocab.string() + " --size 512") == 0);

  const fs::path ckpt = dir / "model.ckpt";
  const fs::path log = dir / "train.log.jsonl";
  REQUIRE(run("train --plan " + (dir / "train.plan").string() + " --vocab " +
              vocab.string() + " --out " + ckpt.string() + " --log " + log.string() +
              " --seed 5",
              (dir / "train_out.txt").string()) == 0);
  CHECK(fs::exists(ckpt));
  const std::string log_bytes = slurp(log);
  CHECK(log_bytes.find("\"l_full\"") != std::string::npos);
  CHECK(log_bytes.find("\"l_omlm\"") != std::string::npos);

  const fs::path pred_out = dir / "preds.jsonl";
  REQUIRE(run("predict --model " + ckpt.string() + " --vocab " + vocab.string() +
              " --in " + (dir / "copy_heldout.mc.jsonl").string() + " --max-len 80" +
              " --out " + pred_out.string()) == 0);
  CHECK(slurp(pred_out).find("probabilities") != std::string::npos);

  REQUIRE(run("eval --model " + ckpt.string() + " --vocab " + vocab.string() +
              " --plan " + (dir / "train.plan").string() + " --out " +
              (dir / "report.jsonl").string(),
              (dir / "eval_out.txt").string()) == 0);
  const std::string report = slurp(dir / "report.jsonl");
  CHECK(report.find("\"type\":\"overall\"") != std::string::npos);

  SUBCASE("evaluating a train-flagged file is a data error") {
    CHECK(run("eval --model " + ckpt.string() + " --vocab " + vocab.string() +
              " --plan " + (dir / "train.plan").string() + " --in " +
              (dir / "copy_train.mc.jsonl").string(),
              (dir / "overlap.txt").string()) == 2);
  }

  SUBCASE("predict on a one-option record is a data error") {
    const fs::path bad = dir / "one_option.mc.jsonl";
    std::ofstream(bad) << "{\"passage\":\"p\",\"question\":null,\"options\":[\"only\"],"
                          "\"answer\":null,\"task_group\":\"native_mc\","
                          "\"source_dataset\":\"x\",\"template_id\":\"t\"}\n";
    CHECK(run("predict --model " + ckpt.string() + " --vocab " + vocab.string() +
              " --in " + bad.string(),
              (dir / "one_option_err.txt").string()) == 2);
  }
}

TEST_CASE("selfcheck passes and exits 0") {
  const fs::path out = work_dir() / "selfcheck.txt";
  CHECK(run("selfcheck", out.string()) == 0);
  CHECK(slurp(out).find("selfcheck passed") != std::string::npos);
}
