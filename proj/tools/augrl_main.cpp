// Command-line front end; talks to the library exclusively through the C API.
//
// Exit codes: 0 success, 1 verification failure, 2 usage/configuration error,
// 3 I/O error.

#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "augrl.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

int status_to_exit(augrl_status s) {
    switch (s) {
        case AUGRL_OK: return kExitOk;
        case AUGRL_VERIFY_FAILED: return kExitVerifyFailed;
        case AUGRL_CONFIG_ERROR: return kExitUsage;
        case AUGRL_IO_ERROR: return kExitIo;
        case AUGRL_RUNTIME_ERROR: return kExitIo;
    }
    return kExitIo;
}

uint64_t default_seed() {
    const char* env = std::getenv("AUGRL_SEED");
    if (env && *env) {
        char* end = nullptr;
        unsigned long long v = std::strtoull(env, &end, 10);
        if (end && *end == '\0') return v;
        std::fprintf(stderr, "warning: ignoring non-numeric AUGRL_SEED '%s'\n", env);
    }
    return 1;
}

std::string default_out_dir() {
    std::time_t t = std::time(nullptr);
    char buf[64];
    std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", std::localtime(&t));
    return std::string("./runs/") + buf;
}

struct CtxDeleter {
    void operator()(augrl_ctx* c) const { augrl_ctx_free(c); }
};

int fail_with(augrl_ctx* ctx, const char* what) {
    std::fprintf(stderr, "error: %s: %s\n", what, augrl_last_error(ctx));
    return status_to_exit(augrl_last_status(ctx));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"augrl - data-augmented actor-critic bench"};
    app.require_subcommand(1);

    uint64_t seed = default_seed();

    // train
    std::string config_path, train_out;
    std::vector<std::string> overrides;
    CLI::App* train = app.add_subcommand("train", "run the training loop from a config file");
    train->add_option("--config", config_path, "configuration file")->required();
    train->add_option("--seed", seed, "run seed (env AUGRL_SEED is the fallback)");
    train->add_option("--out", train_out, "output directory (default ./runs/<timestamp>)");
    train->add_option("--set", overrides, "key=value override, repeatable");
    train->footer(std::string("\n") + augrl_config_help());

    // verify
    std::string suite = "all", csv_path;
    int threads = 0;
    CLI::App* verify = app.add_subcommand("verify", "run numerical verification suites");
    {
        std::string names = "suite name or 'all' (";
        for (int i = 0; i < augrl_verify_suite_count(); ++i) {
            if (i) names += ", ";
            names += augrl_verify_suite_name(i);
        }
        names += ")";
        verify->add_option("--suite", suite, names);
    }
    verify->add_option("--seed", seed, "suite seed");
    verify->add_option("--csv", csv_path, "also write the report as CSV");
    verify->add_option("--threads", threads, "worker threads (0 = hardware)");

    // preview
    std::string transform, param_text, in_pgm, out_pgm;
    CLI::App* preview = app.add_subcommand("preview", "apply one transformation to a PGM image");
    preview->add_option("--transform", transform, "family name when --param has no prefix");
    preview->add_option("--param", param_text, "e.g. 'shift:dx=2,dy=-1' or 'dx=2,dy=-1'")->required();
    preview->add_option("--in", in_pgm, "input image (8-bit P5)")->required();
    preview->add_option("--out", out_pgm, "output image")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    std::unique_ptr<augrl_ctx, CtxDeleter> ctx(augrl_ctx_new());

    if (*train) {
        std::ifstream in(config_path, std::ios::binary);
        if (!in) {
            std::fprintf(stderr, "error: cannot read config file '%s'\n", config_path.c_str());
            return kExitIo;
        }
        std::ostringstream text;
        text << in.rdbuf();
        augrl_config* cfg = augrl_config_parse(ctx.get(), text.str().c_str());
        if (!cfg) return fail_with(ctx.get(), "config");
        for (const std::string& kv : overrides) {
            size_t eq = kv.find('=');
            if (eq == std::string::npos) {
                std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
                augrl_config_free(cfg);
                return kExitUsage;
            }
            std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
            if (augrl_config_set(ctx.get(), cfg, key.c_str(), value.c_str()) != AUGRL_OK) {
                int code = fail_with(ctx.get(), "config override");
                augrl_config_free(cfg);
                return code;
            }
        }
        std::string out_dir = train_out.empty() ? default_out_dir() : train_out;
        std::printf("training (seed %llu) -> %s\n", static_cast<unsigned long long>(seed),
                    out_dir.c_str());
        augrl_train_result* res = augrl_train_run(ctx.get(), cfg, seed, out_dir.c_str());
        augrl_config_free(cfg);
        if (!res) return fail_with(ctx.get(), "train");
        std::printf("done: %d evaluations, best return %.3f, final return %.3f "
                    "(lattice-policy reference %.3f)\n",
                    augrl_train_result_row_count(res), augrl_train_result_best_eval(res),
                    augrl_train_result_final_eval(res), augrl_train_result_oracle_return(res));
        augrl_train_result_free(res);
        return kExitOk;
    }

    if (*verify) {
        augrl_report* rep = augrl_verify_run(ctx.get(), suite.c_str(), seed, threads);
        if (!rep) return fail_with(ctx.get(), "verify");
        std::fputs(augrl_report_text(rep), stdout);
        if (!csv_path.empty() && augrl_report_write_csv(ctx.get(), rep, csv_path.c_str()) != AUGRL_OK) {
            int code = fail_with(ctx.get(), "verify csv");
            augrl_report_free(rep);
            return code;
        }
        int ok = augrl_report_passed(rep);
        augrl_report_free(rep);
        std::printf("verification %s\n", ok ? "passed" : "FAILED");
        return ok ? kExitOk : kExitVerifyFailed;
    }

    if (*preview) {
        augrl_status s = augrl_preview(ctx.get(), transform.empty() ? nullptr : transform.c_str(),
                                       param_text.c_str(), in_pgm.c_str(), out_pgm.c_str());
        if (s != AUGRL_OK) return fail_with(ctx.get(), "preview");
        return kExitOk;
    }

    return kExitUsage;
}
