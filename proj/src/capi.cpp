#include "augrl.h"

#include <cstring>
#include <fstream>
#include <map>
#include <string>

#include "augrl/config.hpp"
#include "augrl/trainer.hpp"
#include "augrl/verify.hpp"

using namespace augrl;

extern "C" {

struct augrl_ctx {
    std::string last_error;
    augrl_status last_status = AUGRL_OK;
};

struct augrl_config {
    std::string text;
    std::map<std::string, std::string> overrides;
};

struct augrl_report {
    std::vector<VerificationReport> reports;
    std::string text_cache;
};

struct augrl_train_result {
    TrainResult result;
};

namespace {

augrl_status classify_exception(augrl_ctx* ctx) {
    augrl_status status = AUGRL_RUNTIME_ERROR;
    std::string message;
    try {
        throw;
    } catch (const ConfigError& e) {
        message = e.what();
        status = AUGRL_CONFIG_ERROR;
    } catch (const std::invalid_argument& e) {
        message = e.what();
        status = AUGRL_CONFIG_ERROR;
    } catch (const std::runtime_error& e) {
        message = e.what();
        status = AUGRL_IO_ERROR;
    } catch (const std::exception& e) {
        message = e.what();
    }
    if (ctx) {
        ctx->last_error = message;
        ctx->last_status = status;
    }
    return status;
}

}  // namespace

augrl_ctx* augrl_ctx_new(void) { return new augrl_ctx(); }
void augrl_ctx_free(augrl_ctx* ctx) { delete ctx; }

const char* augrl_last_error(const augrl_ctx* ctx) {
    return ctx ? ctx->last_error.c_str() : "";
}

augrl_status augrl_last_status(const augrl_ctx* ctx) {
    return ctx ? ctx->last_status : AUGRL_RUNTIME_ERROR;
}

const char* augrl_version(void) {
    static std::string v = build_id();
    return v.c_str();
}

augrl_config* augrl_config_parse(augrl_ctx* ctx, const char* text) {
    if (!text) {
        if (ctx) ctx->last_error = "config text is null";
        return nullptr;
    }
    try {
        load_train_config(text);  // full validation up front
        auto* cfg = new augrl_config();
        cfg->text = text;
        return cfg;
    } catch (...) {
        classify_exception(ctx);
        return nullptr;
    }
}

void augrl_config_free(augrl_config* cfg) { delete cfg; }

augrl_status augrl_config_set(augrl_ctx* ctx, augrl_config* cfg, const char* key,
                              const char* value) {
    if (!cfg || !key || !value) {
        if (ctx) ctx->last_error = "null argument";
        return AUGRL_CONFIG_ERROR;
    }
    try {
        std::map<std::string, std::string> trial = cfg->overrides;
        trial[key] = value;
        load_train_config(cfg->text, trial);
        cfg->overrides = std::move(trial);
        return AUGRL_OK;
    } catch (...) {
        return classify_exception(ctx);
    }
}

const char* augrl_config_help(void) {
    static std::string help = config_help_text();
    return help.c_str();
}

augrl_train_result* augrl_train_run(augrl_ctx* ctx, const augrl_config* cfg, uint64_t seed,
                                    const char* out_dir) {
    if (!cfg) {
        if (ctx) ctx->last_error = "null config";
        return nullptr;
    }
    try {
        TrainConfig tc = load_train_config(cfg->text, cfg->overrides);
        tc.seed = seed;
        auto* res = new augrl_train_result();
        res->result = train(tc, out_dir ? out_dir : "");
        return res;
    } catch (...) {
        classify_exception(ctx);
        return nullptr;
    }
}

void augrl_train_result_free(augrl_train_result* res) { delete res; }

double augrl_train_result_best_eval(const augrl_train_result* res) {
    return res ? res->result.best_eval : 0.0;
}
double augrl_train_result_final_eval(const augrl_train_result* res) {
    return res ? res->result.final_eval : 0.0;
}
double augrl_train_result_oracle_return(const augrl_train_result* res) {
    return res ? res->result.mean_oracle_return : 0.0;
}
int augrl_train_result_row_count(const augrl_train_result* res) {
    return res ? static_cast<int>(res->result.rows.size()) : 0;
}

int augrl_verify_suite_count(void) { return static_cast<int>(verify_suite_names().size()); }

const char* augrl_verify_suite_name(int index) {
    const auto& names = verify_suite_names();
    if (index < 0 || index >= static_cast<int>(names.size())) return nullptr;
    return names[static_cast<size_t>(index)].c_str();
}

augrl_report* augrl_verify_run(augrl_ctx* ctx, const char* suite, uint64_t seed, int threads) {
    if (!suite) {
        if (ctx) ctx->last_error = "null suite name";
        return nullptr;
    }
    try {
        auto* rep = new augrl_report();
        std::string name = suite;
        if (name == "all") {
            rep->reports = run_all_suites(seed, threads);
        } else {
            rep->reports.push_back(run_suite(name, seed));
        }
        return rep;
    } catch (...) {
        classify_exception(ctx);
        return nullptr;
    }
}

void augrl_report_free(augrl_report* rep) { delete rep; }

int augrl_report_passed(const augrl_report* rep) {
    if (!rep) return 0;
    for (const VerificationReport& r : rep->reports)
        if (!r.pass()) return 0;
    return !rep->reports.empty();
}

const char* augrl_report_text(const augrl_report* rep) {
    if (!rep) return "";
    auto* mut = const_cast<augrl_report*>(rep);
    mut->text_cache.clear();
    for (const VerificationReport& r : rep->reports) mut->text_cache += r.text();
    return mut->text_cache.c_str();
}

augrl_status augrl_report_write_csv(augrl_ctx* ctx, const augrl_report* rep, const char* path) {
    if (!rep || !path) {
        if (ctx) ctx->last_error = "null argument";
        return AUGRL_CONFIG_ERROR;
    }
    try {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error(std::string("cannot write ") + path);
        bool header = true;
        for (const VerificationReport& r : rep->reports) {
            out << r.csv(header);
            header = false;
        }
        if (!out) throw std::runtime_error(std::string("write failed for ") + path);
        return AUGRL_OK;
    } catch (...) {
        return classify_exception(ctx);
    }
}

augrl_status augrl_preview(augrl_ctx* ctx, const char* transform, const char* param_text,
                           const char* in_pgm, const char* out_pgm) {
    if (!param_text || !in_pgm || !out_pgm) {
        if (ctx) ctx->last_error = "null argument";
        return AUGRL_CONFIG_ERROR;
    }
    try {
        std::string ptext = param_text;
        if (ptext.find(':') == std::string::npos) {
            if (!transform || !*transform)
                throw std::invalid_argument("parameter text needs a 'kind:' prefix or a --transform name");
            ptext = std::string(transform) + ":" + ptext;
        }
        TransformParam param = TransformParam::from_text(ptext);
        TransformSpec spec;
        spec.kind = param.kind;
        switch (param.kind) {
            case TransformKind::shift:
                spec = TransformSpec::shift_spec(std::max({4, std::abs(param.dx), std::abs(param.dy)}));
                break;
            case TransformKind::blur:
                spec = TransformSpec::blur_spec(0.0, std::max(2.0, param.sigma));
                break;
            case TransformKind::overlay:
                spec = TransformSpec::overlay_spec(param.beta);
                break;
            case TransformKind::randconv:
                spec = TransformSpec::randconv_spec();
                break;
            case TransformKind::rotation:
                spec = TransformSpec::rotation_spec();
                break;
        }
        FrameStack img = read_pgm(in_pgm);
        FrameStack out = apply_transform(spec, param, img);
        write_pgm(out_pgm, out, 0);
        return AUGRL_OK;
    } catch (...) {
        return classify_exception(ctx);
    }
}

}  // extern "C"
