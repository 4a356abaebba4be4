#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "support.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string output;
};

Result run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + GENFT_CLI_PATH + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  std::array<char, 512> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) out += buf.data();
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string write_config(const std::string& name, const std::string& text) {
  const std::string path = testing::temp_path(name);
  std::ofstream(path) << text;
  return path;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const char* kMinimal = "shared_dim = 3\nspecific_dim = 1\nd_in = 6\nd_out = 6\nscaling = 0.1\n"
                       "epochs = 3\nn_samples = 16\n";

}  // namespace

TEST_CASE("budget command") {
  Result r = run("budget --L 12 --D 768 --r 34 --types 2");
  CHECK(r.code == 0);
  CHECK(r.output.find("lora_params=1253376") != std::string::npos);

  r = run("budget --L 12 --r 8 --b 2");
  CHECK(r.code == 0);
  CHECK(r.output.find("a=72, latent=74 > r=8") != std::string::npos);

  r = run("budget --L 1 --r 5 --b 0");
  CHECK(r.code == 0);
  CHECK(r.output.find("latent=5") != std::string::npos);
  CHECK(r.output.find(">") == std::string::npos);

  r = run("budget --L 12 --r 2 --b 4");
  CHECK(r.code == 2);
  CHECK(r.output.find("infeasible") != std::string::npos);

  r = run("budget --L 12 --D 768 --a 32 --b 2 --types 2");
  CHECK(r.output.find("genft_params=172032") != std::string::npos);

  const std::string csv = testing::temp_path("curve.csv");
  r = run("budget --curve --L 12 --D 768 --dim-max 8 --out " + csv);
  CHECK(r.code == 0);
  const std::string text = slurp(csv);
  CHECK(text.rfind("b,dim,lora_params,genft_params\n0,1,18432,1536\n", 0) == 0);
  CHECK(text.find("\n4,4,73728,73728\n") != std::string::npos);
}

TEST_CASE("train command writes artifacts and validates configs") {
  const std::string cfg = write_config("cli_min.cfg", kMinimal);
  const std::string out = testing::temp_path("cli_train");
  fs::remove_all(out);
  Result r = run("train --config " + cfg + " --out " + out + " --export-base");
  CHECK(r.code == 0);
  CHECK(fs::exists(out + "/loss.csv"));
  CHECK(fs::exists(out + "/checkpoint.genft"));
  CHECK(fs::exists(out + "/manifest.json"));
  CHECK(fs::exists(out + "/base_type0_1.gftm"));

  const std::string out2 = testing::temp_path("cli_train2");
  CHECK(run("train --config " + cfg + " --out " + out2, "GENFT_THREADS=3").code == 0);
  CHECK(slurp(out + "/loss.csv") == slurp(out2 + "/loss.csv"));
  CHECK(slurp(out + "/checkpoint.genft") == slurp(out2 + "/checkpoint.genft"));

  const std::string out3 = testing::temp_path("cli_train3");
  CHECK(run("train --config " + cfg + " --seed 5 --out " + out3).code == 0);
  CHECK(slurp(out + "/loss.csv") != slurp(out3 + "/loss.csv"));

  r = run("train --config " + write_config("cli_bad.cfg", "sigma1 = \"relu6\"\n"));
  CHECK(r.code == 2);
  CHECK(r.output.find("sigma1") != std::string::npos);

  r = run("train --config " + write_config("cli_bad2.cfg", "ablation = \"no_row,no_column\"\n"));
  CHECK(r.code == 2);
  CHECK(r.output.find("configuration error") != std::string::npos);

  CHECK(run("train --config /nonexistent.cfg").code == 3);
  CHECK(run("train").code == 2);
  CHECK(run("frobnicate").code == 2);
  CHECK(run("budget --r 4", "GENFT_THREADS=zero").code == 2);
}

TEST_CASE("diverging training exits with a runtime error") {
  const std::string cfg =
      write_config("cli_diverge.cfg", std::string(kMinimal) + "lr = 1e300\nweight_decay = 0\n");
  const Result r = run("train --config " + cfg + " --out " + testing::temp_path("cli_div"));
  CHECK(r.code == 3);
  CHECK(r.output.find("step") != std::string::npos);
}

TEST_CASE("merge and dump commands") {
  const std::string cfg = write_config("cli_merge.cfg", kMinimal);
  const std::string out = testing::temp_path("cli_merge_run");
  fs::remove_all(out);
  REQUIRE(run("train --config " + cfg + " --out " + out + " --export-base").code == 0);
  const std::string ck = out + "/checkpoint.genft", w0 = out + "/base_type0_0.gftm";

  Result r = run("merge --checkpoint " + ck + " --w0 " + w0 + " --out " + out + "/m.gftm --self-check");
  CHECK(r.code == 0);
  CHECK(r.output.find("self-check passed") != std::string::npos);
  CHECK(fs::exists(out + "/m.gftm"));

  r = run("merge --checkpoint " + ck + " --w0 " + out + "/m.gftm --layer 5 --out " + out + "/x.gftm");
  CHECK(r.code != 0);

  r = run("dump --checkpoint " + ck + " --w0 " + w0 + " --layer 0 --out " + out + "/dump");
  CHECK(r.code == 0);
  CHECK(fs::exists(out + "/dump/W0.csv"));
  CHECK(fs::exists(out + "/dump/delta.csv"));
  CHECK(fs::exists(out + "/dump/merged.csv"));
}

TEST_CASE("merge of a zero update returns W0 byte for byte") {
  // Zero A and B get zero gradients, so the update stays exactly zero.
  const std::string cfg =
      write_config("cli_zero.cfg", "method = lora\nlora_rank = 2\nd_in = 5\nd_out = 5\nepochs = 2\n"
                                   "layers = 1\nlora_init_a = Z\n");
  const std::string out = testing::temp_path("cli_zero_run");
  fs::remove_all(out);
  REQUIRE(run("train --config " + cfg + " --out " + out + " --export-base").code == 0);
  const std::string w0 = out + "/base_type0_0.gftm";
  REQUIRE(run("merge --checkpoint " + out + "/checkpoint.genft --w0 " + w0 + " --out " + out +
              "/merged.gftm --self-check")
              .code == 0);
  CHECK(slurp(out + "/merged.gftm") == slurp(w0));
}

TEST_CASE("grad-check, ablate and bench commands") {
  const std::string cfg = write_config("cli_gc.cfg", kMinimal);
  Result r = run("grad-check --config " + cfg);
  CHECK(r.code == 0);
  CHECK(r.output.find("PASS overall") != std::string::npos);

  const std::string csv = testing::temp_path("cli_ablate.csv");
  r = run("ablate --config " + cfg + " --seeds 1,2 --out " + csv);
  CHECK(r.code == 0);
  const std::string text = slurp(csv);
  CHECK(text.find("1,no_shared,0,1,") != std::string::npos);
  CHECK(text.find("2,no_column,3,1,") != std::string::npos);

  r = run("bench --dims 16,32 --n 4 --repeats 3");
  CHECK(r.code == 0);
  CHECK(r.output.rfind("method,d,dim,median_seconds\n", 0) == 0);
  CHECK(r.output.find("genft,32,4,") != std::string::npos);
}
