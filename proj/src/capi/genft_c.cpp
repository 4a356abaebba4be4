#include "genft/genft.h"

#include <cstring>
#include <sstream>
#include <string>

#include "genft/app.hpp"
#include "genft/budget.hpp"
#include "genft/checkpoint.hpp"
#include "genft/config.hpp"
#include "genft/errors.hpp"
#include "genft/matrix.hpp"

struct genft_matrix {
  genft::Matrix m;
};

struct genft_config {
  genft::RunConfig c;
};

struct genft_checkpoint {
  genft::Checkpoint ck;
};

namespace {

thread_local std::string g_last_error;

genft_status fail(genft_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename F>
genft_status guard(F&& f) {
  try {
    f();
    g_last_error.clear();
    return GENFT_OK;
  } catch (const genft::DimensionError& e) {
    return fail(GENFT_ERR_DIMENSION, e.what());
  } catch (const genft::ConfigError& e) {
    return fail(GENFT_ERR_CONFIG, e.what());
  } catch (const genft::InfeasibleError& e) {
    return fail(GENFT_ERR_INFEASIBLE, e.what());
  } catch (const genft::ContractError& e) {
    return fail(GENFT_ERR_CONTRACT, e.what());
  } catch (const genft::TrainingError& e) {
    return fail(GENFT_ERR_TRAINING, e.what());
  } catch (const genft::IoError& e) {
    return fail(GENFT_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(GENFT_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(GENFT_ERR_INTERNAL, "unknown error");
  }
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

#define GENFT_REQUIRE(ptr)                                          \
  do {                                                              \
    if (!(ptr)) return fail(GENFT_ERR_ARGUMENT, #ptr " is null");   \
  } while (0)

std::string group_name(const char* group) { return group ? group : ""; }

genft::BudgetSpec to_spec(const genft_budget_spec* s) {
  genft::BudgetSpec spec;
  spec.layers = s->layers;
  spec.d_in = s->d_in;
  spec.d_out = s->d_out;
  spec.types = s->types;
  spec.r = s->r;
  spec.a = s->a;
  spec.b = s->b;
  spec.bias = s->bias != 0;
  return spec;
}

}  // namespace

extern "C" {

const char* genft_last_error(void) { return g_last_error.c_str(); }

const char* genft_status_name(genft_status status) {
  switch (status) {
    case GENFT_OK: return "ok";
    case GENFT_ERR_ARGUMENT: return "argument error";
    case GENFT_ERR_DIMENSION: return "dimension error";
    case GENFT_ERR_CONFIG: return "configuration error";
    case GENFT_ERR_INFEASIBLE: return "infeasible";
    case GENFT_ERR_CONTRACT: return "contract error";
    case GENFT_ERR_TRAINING: return "training error";
    case GENFT_ERR_IO: return "io error";
    case GENFT_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

int genft_status_is_validation(genft_status status) {
  return status == GENFT_ERR_ARGUMENT || status == GENFT_ERR_DIMENSION ||
         status == GENFT_ERR_CONFIG || status == GENFT_ERR_INFEASIBLE;
}

const char* genft_version(void) { return genft::kToolVersion; }

genft_status genft_set_threads(uint32_t threads) {
  if (threads == 0) return fail(GENFT_ERR_ARGUMENT, "thread count must be positive");
  return guard([&] { genft::set_matmul_threads(threads); });
}

uint32_t genft_threads(void) { return genft::matmul_threads(); }

void genft_string_free(char* s) { delete[] s; }

genft_status genft_matrix_create(size_t rows, size_t cols, const double* values,
                                 genft_matrix** out) {
  GENFT_REQUIRE(out);
  return guard([&] {
    auto* h = new genft_matrix{genft::Matrix(rows, cols)};
    if (values) std::memcpy(h->m.values().data(), values, rows * cols * sizeof(double));
    *out = h;
  });
}

void genft_matrix_free(genft_matrix* m) { delete m; }
size_t genft_matrix_rows(const genft_matrix* m) { return m ? m->m.rows() : 0; }
size_t genft_matrix_cols(const genft_matrix* m) { return m ? m->m.cols() : 0; }
const double* genft_matrix_data(const genft_matrix* m) {
  return m ? m->m.values().data() : nullptr;
}
uint64_t genft_matrix_checksum(const genft_matrix* m) { return m ? genft::checksum(m->m) : 0; }

genft_status genft_matrix_load(const char* path, genft_matrix** out) {
  GENFT_REQUIRE(path);
  GENFT_REQUIRE(out);
  return guard([&] { *out = new genft_matrix{genft::load_gftm(path)}; });
}

genft_status genft_matrix_save(const genft_matrix* m, const char* path) {
  GENFT_REQUIRE(m);
  GENFT_REQUIRE(path);
  return guard([&] { genft::save_gftm(path, m->m); });
}

genft_status genft_matrix_save_csv(const genft_matrix* m, const char* path) {
  GENFT_REQUIRE(m);
  GENFT_REQUIRE(path);
  return guard([&] { genft::save_csv(path, m->m); });
}

genft_status genft_config_default(genft_config** out) {
  GENFT_REQUIRE(out);
  return guard([&] { *out = new genft_config{}; });
}

genft_status genft_config_parse(const char* text, genft_config** out) {
  GENFT_REQUIRE(text);
  GENFT_REQUIRE(out);
  return guard([&] { *out = new genft_config{genft::parse_config(text)}; });
}

genft_status genft_config_load(const char* path, genft_config** out) {
  GENFT_REQUIRE(path);
  GENFT_REQUIRE(out);
  return guard([&] { *out = new genft_config{genft::load_config(path)}; });
}

void genft_config_free(genft_config* c) { delete c; }

genft_status genft_config_set(genft_config* c, const char* key, const char* value) {
  GENFT_REQUIRE(c);
  GENFT_REQUIRE(key);
  GENFT_REQUIRE(value);
  return guard([&] {
    genft::RunConfig next = c->c;
    genft::set_config_value(next, key, value);
    next.validate();
    c->c = next;
  });
}

uint64_t genft_config_seed(const genft_config* c) { return c ? c->c.train.seed : 0; }

genft_status genft_config_to_text(const genft_config* c, char** out) {
  GENFT_REQUIRE(c);
  GENFT_REQUIRE(out);
  return guard([&] { *out = dup_string(genft::to_config_text(c->c)); });
}

genft_status genft_count_lora(const genft_budget_spec* spec, uint64_t* out) {
  GENFT_REQUIRE(spec);
  GENFT_REQUIRE(out);
  return guard([&] { *out = genft::count_lora(to_spec(spec)); });
}

genft_status genft_count_genft(const genft_budget_spec* spec, uint64_t* out) {
  GENFT_REQUIRE(spec);
  GENFT_REQUIRE(out);
  return guard([&] { *out = genft::count_genft(to_spec(spec)); });
}

genft_status genft_solve_shared_dim(uint64_t layers, uint64_t r, uint64_t b, uint64_t* out) {
  GENFT_REQUIRE(out);
  return guard([&] { *out = genft::solve_shared_dim(layers, r, b); });
}

genft_status genft_budget(const genft_budget_spec* spec, int solve, genft_budget_report* out) {
  GENFT_REQUIRE(spec);
  GENFT_REQUIRE(out);
  return guard([&] {
    const genft::BudgetReport r = genft::budget_report(to_spec(spec), solve != 0);
    out->lora_params = r.lora_params;
    out->genft_params = r.genft_params;
    out->latent_dim = r.latent_dim;
    out->has_solved_a = r.solved_a.has_value();
    out->solved_a = r.solved_a.value_or(0);
    out->inequality_holds = r.inequality_holds;
  });
}

genft_status genft_budget_curve_csv(uint64_t layers, uint64_t d, uint64_t types, uint64_t b,
                                    uint64_t dim_min, uint64_t dim_max, char** csv) {
  GENFT_REQUIRE(csv);
  return guard([&] {
    std::ostringstream out;
    genft::write_budget_csv(out, genft::budget_curve(layers, d, types, b, dim_min, dim_max));
    *csv = dup_string(out.str());
  });
}

genft_status genft_train(const genft_config* c, const char* config_path, const char* out_dir,
                         int export_base, genft_train_result* result) {
  GENFT_REQUIRE(c);
  GENFT_REQUIRE(out_dir);
  return guard([&] {
    genft::Experiment e;
    genft::train_to_directory(c->c, config_path ? config_path : "", out_dir, export_base != 0, &e);
    if (result) {
      result->initial_loss = e.run.initial_loss;
      result->final_loss = e.run.final_loss;
      result->steps = e.run.steps;
      result->base_unchanged = e.run.base_checksums_before == e.run.base_checksums_after;
    }
  });
}

genft_status genft_ablate(const genft_config* c, const uint64_t* seeds, size_t n_seeds,
                          char** csv) {
  GENFT_REQUIRE(c);
  GENFT_REQUIRE(csv);
  if (n_seeds > 0 && !seeds) return fail(GENFT_ERR_ARGUMENT, "seeds is null");
  return guard([&] {
    std::vector<std::uint64_t> list(seeds, seeds + n_seeds);
    if (list.empty()) list.push_back(c->c.train.seed);
    std::ostringstream out;
    genft::write_ablation_csv(out, genft::run_ablation(c->c, list));
    *csv = dup_string(out.str());
  });
}

genft_status genft_grad_check(const genft_config* c, double tolerance, int* passed,
                              char** report) {
  GENFT_REQUIRE(c);
  GENFT_REQUIRE(passed);
  return guard([&] {
    const genft::GradCheckReport r = genft::run_grad_check(c->c, tolerance);
    *passed = r.passed;
    if (report) *report = dup_string(r.to_text());
  });
}

genft_status genft_bench(const size_t* dims, size_t n_dims, size_t n, size_t repeats,
                         uint64_t seed, char** csv) {
  GENFT_REQUIRE(dims);
  GENFT_REQUIRE(csv);
  return guard([&] {
    const auto cases = genft::bench_cases(std::vector<std::size_t>(dims, dims + n_dims), n);
    std::ostringstream out;
    genft::write_bench_csv(out, genft::timing_bench(cases, 32, repeats, seed));
    *csv = dup_string(out.str());
  });
}

genft_status genft_checkpoint_load(const char* path, genft_checkpoint** out) {
  GENFT_REQUIRE(path);
  GENFT_REQUIRE(out);
  return guard([&] { *out = new genft_checkpoint{genft::load_checkpoint(path)}; });
}

void genft_checkpoint_free(genft_checkpoint* ck) { delete ck; }

genft_status genft_checkpoint_save(const genft_checkpoint* ck, const char* path) {
  GENFT_REQUIRE(ck);
  GENFT_REQUIRE(path);
  return guard([&] { genft::save_checkpoint(path, ck->ck.groups, ck->ck.seed); });
}

size_t genft_checkpoint_group_count(const genft_checkpoint* ck) {
  return ck ? ck->ck.groups.size() : 0;
}

genft_status genft_checkpoint_describe(const genft_checkpoint* ck, char** out) {
  GENFT_REQUIRE(ck);
  GENFT_REQUIRE(out);
  return guard([&] {
    std::ostringstream s;
    for (const genft::AdapterGroup& g : ck->ck.groups) {
      s << g.name() << ' ' << genft::to_string(g.kind()) << ' ' << g.layers() << ' '
        << g.d_out() << ' ' << g.d_in() << '\n';
    }
    *out = dup_string(s.str());
  });
}

genft_status genft_checkpoint_delta(genft_checkpoint* ck, const char* group, size_t layer,
                                    const genft_matrix* w0, genft_matrix** out) {
  GENFT_REQUIRE(ck);
  GENFT_REQUIRE(w0);
  GENFT_REQUIRE(out);
  return guard([&] {
    genft::AdapterGroup& g = genft::find_group(ck->ck, group_name(group));
    g.set_base(layer, w0->m);
    *out = new genft_matrix{g.delta(layer)};
  });
}

genft_status genft_checkpoint_merge(genft_checkpoint* ck, const char* group, size_t layer,
                                    const genft_matrix* w0, size_t self_check_inputs,
                                    genft_matrix** merged, double* self_check_error) {
  GENFT_REQUIRE(ck);
  GENFT_REQUIRE(w0);
  GENFT_REQUIRE(merged);
  return guard([&] {
    genft::MergeResult r = genft::merge_checkpoint(ck->ck, group_name(group), layer, w0->m,
                                                   self_check_inputs, ck->ck.seed);
    if (self_check_error) *self_check_error = r.self_check_error;
    *merged = new genft_matrix{std::move(r.merged)};
  });
}

genft_status genft_checkpoint_dump(genft_checkpoint* ck, const char* group, size_t layer,
                                   const genft_matrix* w0, const char* out_dir) {
  GENFT_REQUIRE(ck);
  GENFT_REQUIRE(w0);
  GENFT_REQUIRE(out_dir);
  return guard([&] { genft::dump_delta(ck->ck, group_name(group), layer, w0->m, out_dir); });
}

double genft_merge_tolerance(void) { return genft::kMergeTolerance; }

}  // extern "C"
