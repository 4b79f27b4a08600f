#include "hbar/config.hpp"

#include "hbar/csv.hpp"
#include "hbar/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace hbar::config {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

/// Parse position for diagnostics.
struct Cursor {
    const std::string& origin;
    std::size_t line = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError(origin + ":" + std::to_string(line) + ": " + msg);
    }
};

double to_double(const Cursor& at, const std::string& key, const std::string& v) {
    const char* s = v.c_str();
    char* end = nullptr;
    const double x = std::strtod(s, &end);
    if (end == s || *end != '\0') at.fail("key '" + key + "': not a number: '" + v + "'");
    return x;
}

std::uint64_t to_u64(const Cursor& at, const std::string& key, const std::string& v) {
    const char* s = v.c_str();
    char* end = nullptr;
    const unsigned long long x = std::strtoull(s, &end, 10);
    if (end == s || *end != '\0' || v[0] == '-')
        at.fail("key '" + key + "': not a non-negative integer: '" + v + "'");
    return x;
}

bool to_bool(const Cursor& at, const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    at.fail("key '" + key + "': expected true/false, got '" + v + "'");
}

std::vector<std::string> split_ws(const std::string& v) {
    std::istringstream in(v);
    std::vector<std::string> parts;
    std::string tok;
    while (in >> tok) parts.push_back(tok);
    return parts;
}

std::vector<double> to_doubles(const Cursor& at, const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& tok : split_ws(v)) out.push_back(to_double(at, key, tok));
    if (out.empty()) at.fail("key '" + key + "': empty list");
    return out;
}

std::vector<std::uint64_t> to_u64s(const Cursor& at, const std::string& key,
                                   const std::string& v) {
    std::vector<std::uint64_t> out;
    for (const auto& tok : split_ws(v)) out.push_back(to_u64(at, key, tok));
    if (out.empty()) at.fail("key '" + key + "': empty list");
    return out;
}

std::string file_stem(const std::string& path) {
    const auto slash = path.find_last_of("/\\");
    std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
    const auto dot = base.find_last_of('.');
    return dot == std::string::npos || dot == 0 ? base : base.substr(0, dot);
}

void apply_attack_key(const Cursor& at, attacks::AttackConfig& a, const std::string& key,
                      const std::string& v) {
    if (key == "radius") {
        a.radius = to_double(at, key, v);
        if (a.radius < 0) at.fail("radius must be >= 0");
    } else if (key == "step_size") {
        a.step_size = to_double(at, key, v);
        if (a.step_size < 0) at.fail("step_size must be >= 0");
    } else if (key == "steps") {
        a.steps = to_u64(at, key, v);
    } else if (key == "loss") {
        if (v == "cross_entropy") a.loss = attacks::AttackConfig::Loss::cross_entropy;
        else if (v == "cw_margin") a.loss = attacks::AttackConfig::Loss::cw_margin;
        else at.fail("loss must be cross_entropy or cw_margin, got '" + v + "'");
    } else if (key == "random_start") {
        a.random_start = to_bool(at, key, v);
    } else if (key == "clamp_lo") {
        a.clamp_lo = to_double(at, key, v);
    } else if (key == "clamp_hi") {
        a.clamp_hi = to_double(at, key, v);
    } else if (key == "seed") {
        a.seed = to_u64(at, key, v);
    } else {
        at.fail("unknown key '" + key + "' in an [attack.*] section");
    }
}

}  // namespace

const attacks::AttackConfig* ExperimentConfig::find_attack(const std::string& name) const {
    for (const auto& [n, a] : eval_attacks)
        if (n == name) return &a;
    return nullptr;
}

ExperimentConfig parse_text(const std::string& text, const std::string& origin) {
    ExperimentConfig cfg;
    Cursor at{origin};

    std::string section;
    std::string attack_name;                                     // set inside [attack.*]
    std::vector<std::pair<std::string, attacks::AttackConfig>> attacks_in_order;
    bool seeds_given = false;

    std::istringstream in(text);
    std::string raw;
    while (std::getline(in, raw)) {
        ++at.line;
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;

        if (line.front() == '[') {
            if (line.back() != ']') at.fail("unterminated section header: " + line);
            section = line.substr(1, line.size() - 2);
            attack_name.clear();
            if (section.rfind("attack.", 0) == 0) {
                attack_name = section.substr(7);
                if (attack_name.empty()) at.fail("attack section needs a name: [attack.<name>]");
                bool known = false;
                for (const auto& [n, a] : attacks_in_order)
                    if (n == attack_name) known = true;
                if (!known) attacks_in_order.emplace_back(attack_name, attacks::AttackConfig{});
            } else if (section != "data" && section != "model" && section != "train" &&
                       section != "hbar" && section != "eval" && section != "sweep" &&
                       section != "theorems" && section != "output") {
                at.fail("unknown section [" + section + "]");
            }
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string::npos) at.fail("expected key = value, got: " + line);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) at.fail("empty key");
        if (section.empty()) at.fail("key '" + key + "' before any [section]");

        if (!attack_name.empty()) {
            for (auto& [n, a] : attacks_in_order)
                if (n == attack_name) apply_attack_key(at, a, key, value);
        } else if (section == "data") {
            if (key == "root") cfg.data_root = value;
            else if (key == "source") {
                if (value != "mnist" && value != "synth")
                    at.fail("source must be mnist or synth, got '" + value + "'");
                cfg.source = value;
            }
            else if (key == "train_images") cfg.train_images = value;
            else if (key == "train_labels") cfg.train_labels = value;
            else if (key == "test_images") cfg.test_images = value;
            else if (key == "test_labels") cfg.test_labels = value;
            else if (key == "train_take") cfg.train_take = to_u64(at, key, value);
            else if (key == "test_take") cfg.test_take = to_u64(at, key, value);
            else if (key == "probe_take") cfg.probe_take = to_u64(at, key, value);
            else if (key == "stratified") cfg.stratified = to_bool(at, key, value);
            else if (key == "seed") cfg.data_seed = to_u64(at, key, value);
            else if (key == "synth_n") cfg.synth_n = to_u64(at, key, value);
            else if (key == "synth_test") cfg.synth_test = to_u64(at, key, value);
            else if (key == "synth_d") cfg.synth_d = to_u64(at, key, value);
            else if (key == "synth_sigma") {
                cfg.synth_sigma = to_double(at, key, value);
                if (cfg.synth_sigma <= 0) at.fail("synth_sigma must be > 0");
            }
            else at.fail("unknown key '" + key + "' in [data]");
        } else if (section == "model") {
            if (key == "dims") {
                cfg.dims.clear();
                for (auto d : to_u64s(at, key, value)) {
                    if (d == 0) at.fail("dims entries must be >= 1");
                    cfg.dims.push_back(static_cast<std::size_t>(d));
                }
                if (cfg.dims.size() < 2) at.fail("dims needs at least input and output");
            }
            else at.fail("unknown key '" + key + "' in [model]");
        } else if (section == "train") {
            if (key == "epochs") cfg.train.epochs = to_u64(at, key, value);
            else if (key == "batch_size") {
                cfg.train.batch_size = to_u64(at, key, value);
                if (cfg.train.batch_size < 2) at.fail("batch_size must be >= 2");
            }
            else if (key == "optimizer") {
                if (value == "sgd") cfg.train.optimizer = trainer::TrainConfig::Optimizer::sgd;
                else if (value == "adam") cfg.train.optimizer = trainer::TrainConfig::Optimizer::adam;
                else at.fail("optimizer must be sgd or adam, got '" + value + "'");
            }
            else if (key == "learning_rate") {
                cfg.train.learning_rate = to_double(at, key, value);
                if (cfg.train.learning_rate <= 0) at.fail("learning_rate must be > 0");
            }
            else if (key == "lr_schedule") {
                cfg.train.lr_schedule.clear();
                for (const auto& tok : split_ws(value)) {
                    const auto colon = tok.find(':');
                    if (colon == std::string::npos)
                        at.fail("lr_schedule entries are epoch:multiplier, got '" + tok + "'");
                    const auto ep = to_u64(at, key, tok.substr(0, colon));
                    const auto mult = to_double(at, key, tok.substr(colon + 1));
                    if (ep == 0) at.fail("lr_schedule epochs are 1-based");
                    if (mult <= 0) at.fail("lr_schedule multipliers must be > 0");
                    cfg.train.lr_schedule.emplace_back(ep, mult);
                }
                for (std::size_t i = 1; i < cfg.train.lr_schedule.size(); ++i)
                    if (cfg.train.lr_schedule[i].first <= cfg.train.lr_schedule[i - 1].first)
                        at.fail("lr_schedule epochs must be strictly increasing");
            }
            else if (key == "seeds") {
                cfg.seeds = to_u64s(at, key, value);
                seeds_given = true;
            }
            else if (key == "seed") {
                cfg.seeds = {to_u64(at, key, value)};
                seeds_given = true;
            }
            else if (key == "adversarial") cfg.adversarial = to_bool(at, key, value);
            else at.fail("unknown key '" + key + "' in [train]");
        } else if (section == "hbar") {
            if (key == "lambda_x") {
                cfg.train.hbar.lambda_x = to_double(at, key, value);
                if (cfg.train.hbar.lambda_x < 0) at.fail("lambda_x must be >= 0");
            }
            else if (key == "lambda_y") {
                cfg.train.hbar.lambda_y = to_double(at, key, value);
                if (cfg.train.hbar.lambda_y < 0) at.fail("lambda_y must be >= 0");
            }
            else if (key == "ce_weight") {
                cfg.train.hbar.ce_weight = to_double(at, key, value);
                if (cfg.train.hbar.ce_weight < 0) at.fail("ce_weight must be >= 0");
            }
            else if (key == "layer_mask") {
                cfg.train.hbar.layer_mask.clear();
                for (auto j : to_u64s(at, key, value)) {
                    if (j == 0) at.fail("layer_mask indices are 1-based");
                    cfg.train.hbar.layer_mask.push_back(static_cast<std::size_t>(j));
                }
            }
            else if (key == "kernel_sigma_rule") {
                kernels::KernelSpec::SigmaRule rule;
                if (value == "fixed") rule = kernels::KernelSpec::SigmaRule::fixed;
                else if (value == "scaled_sqrt_dim")
                    rule = kernels::KernelSpec::SigmaRule::scaled_sqrt_dim;
                else at.fail("kernel_sigma_rule must be fixed or scaled_sqrt_dim");
                cfg.train.kernels.x.sigma_rule = rule;
                cfg.train.kernels.z.sigma_rule = rule;
            }
            else if (key == "kernel_sigma") {
                const double s = to_double(at, key, value);
                if (s <= 0) at.fail("kernel_sigma must be > 0");
                cfg.train.kernels.x.sigma_value = s;
                cfg.train.kernels.z.sigma_value = s;
            }
            else at.fail("unknown key '" + key + "' in [hbar]");
        } else if (section == "eval") {
            if (key == "primary_attack") cfg.primary_attack = value;
            else if (key == "eval_batch") {
                cfg.eval_batch = to_u64(at, key, value);
                if (cfg.eval_batch == 0) at.fail("eval_batch must be >= 1");
            }
            else if (key == "log_robust") cfg.log_robust = to_bool(at, key, value);
            else if (key == "robust_limit") cfg.robust_limit = to_u64(at, key, value);
            else at.fail("unknown key '" + key + "' in [eval]");
        } else if (section == "sweep") {
            if (key == "lambda_x") cfg.sweep_lambda_x = to_doubles(at, key, value);
            else if (key == "lambda_y") cfg.sweep_lambda_y = to_doubles(at, key, value);
            else at.fail("unknown key '" + key + "' in [sweep]");
        } else if (section == "theorems") {
            auto& t = cfg.theorems;
            if (key == "lambda_low_x") t.lambda_low_x = to_double(at, key, value);
            else if (key == "lambda_low_y") t.lambda_low_y = to_double(at, key, value);
            else if (key == "lambda_high_x") t.lambda_high_x = to_double(at, key, value);
            else if (key == "lambda_high_y") t.lambda_high_y = to_double(at, key, value);
            else if (key == "radii") {
                t.radii = to_doubles(at, key, value);
                for (double r : t.radii)
                    if (r < 0) at.fail("radii must be >= 0");
            }
            else if (key == "rho_radius") {
                t.rho_radius = to_double(at, key, value);
                if (t.rho_radius <= 0) at.fail("rho_radius must be > 0");
            }
            else if (key == "attack_steps") {
                t.attack_steps = to_u64(at, key, value);
                if (t.attack_steps == 0) at.fail("attack_steps must be >= 1");
            }
            else if (key == "attack_step_size") {
                t.attack_step_size = to_double(at, key, value);
                if (t.attack_step_size <= 0) at.fail("attack_step_size must be > 0");
            }
            else if (key == "probe_limit") {
                t.probe_limit = to_u64(at, key, value);
                if (t.probe_limit < 2) at.fail("probe_limit must be >= 2");
            }
            else at.fail("unknown key '" + key + "' in [theorems]");
        } else if (section == "output") {
            if (key == "dir") cfg.out_dir = value;
            else if (key == "run_name") cfg.run_name = value;
            else at.fail("unknown key '" + key + "' in [output]");
        }
    }

    // Cross-field resolution.
    at.line = 0;
    if (!seeds_given) cfg.seeds = {0};
    cfg.train.seed = cfg.seeds.front();

    for (auto& [name, a] : attacks_in_order) {
        if (a.radius > 0 && a.steps > 0 && a.step_size <= 0)
            at.fail("[attack." + name + "]: steps > 0 needs step_size > 0");
        if (a.clamp_lo >= a.clamp_hi)
            at.fail("[attack." + name + "]: clamp_lo must be < clamp_hi");
        if (name == "train") cfg.train_attack = a;
        else cfg.eval_attacks.emplace_back(name, a);
    }

    if (cfg.adversarial) {
        if (!cfg.train_attack) at.fail("adversarial = true needs an [attack.train] section");
        cfg.train.adversarial = cfg.train_attack;
    }

    if (cfg.primary_attack.empty() && !cfg.eval_attacks.empty())
        cfg.primary_attack = cfg.eval_attacks.front().first;
    if (!cfg.primary_attack.empty() && !cfg.find_attack(cfg.primary_attack))
        at.fail("primary_attack '" + cfg.primary_attack + "' has no [attack." +
                cfg.primary_attack + "] section");

    if (cfg.log_robust) {
        if (cfg.primary_attack.empty())
            at.fail("log_robust = true needs at least one eval [attack.*] section");
        cfg.train.eval_attack = *cfg.find_attack(cfg.primary_attack);
        cfg.train.eval_attack_limit = cfg.robust_limit;
    }

    if (cfg.run_name.empty()) cfg.run_name = file_stem(origin);
    if (cfg.run_name.empty()) cfg.run_name = "run";

    rehash(cfg);
    return cfg;
}

ExperimentConfig parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str(), path);
}

std::string canonical_text(const ExperimentConfig& cfg) {
    std::map<std::string, std::string> kv;
    const auto put_d = [&](const std::string& k, double v) { kv[k] = csv::fmt(v); };
    const auto put_u = [&](const std::string& k, std::uint64_t v) { kv[k] = std::to_string(v); };
    const auto put_s = [&](const std::string& k, const std::string& v) { kv[k] = v; };
    const auto put_b = [&](const std::string& k, bool v) { kv[k] = v ? "true" : "false"; };

    put_s("data.root", cfg.data_root);
    put_s("data.source", cfg.source);
    put_s("data.train_images", cfg.train_images);
    put_s("data.train_labels", cfg.train_labels);
    put_s("data.test_images", cfg.test_images);
    put_s("data.test_labels", cfg.test_labels);
    put_u("data.train_take", cfg.train_take);
    put_u("data.test_take", cfg.test_take);
    put_u("data.probe_take", cfg.probe_take);
    put_b("data.stratified", cfg.stratified);
    put_u("data.seed", cfg.data_seed);
    put_u("data.synth_n", cfg.synth_n);
    put_u("data.synth_test", cfg.synth_test);
    put_u("data.synth_d", cfg.synth_d);
    put_d("data.synth_sigma", cfg.synth_sigma);

    {
        std::string dims;
        for (std::size_t d : cfg.dims) dims += (dims.empty() ? "" : " ") + std::to_string(d);
        put_s("model.dims", dims);
    }

    put_u("train.epochs", cfg.train.epochs);
    put_u("train.batch_size", cfg.train.batch_size);
    put_s("train.optimizer",
          cfg.train.optimizer == trainer::TrainConfig::Optimizer::sgd ? "sgd" : "adam");
    put_d("train.learning_rate", cfg.train.learning_rate);
    {
        std::string sched;
        for (const auto& [ep, mult] : cfg.train.lr_schedule)
            sched += (sched.empty() ? "" : " ") + std::to_string(ep) + ":" + csv::fmt(mult);
        put_s("train.lr_schedule", sched);
    }
    {
        std::string seeds;
        for (auto s : cfg.seeds) seeds += (seeds.empty() ? "" : " ") + std::to_string(s);
        put_s("train.seeds", seeds);
    }
    put_b("train.adversarial", cfg.adversarial);

    put_d("hbar.lambda_x", cfg.train.hbar.lambda_x);
    put_d("hbar.lambda_y", cfg.train.hbar.lambda_y);
    put_d("hbar.ce_weight", cfg.train.hbar.ce_weight);
    {
        std::string mask;
        for (std::size_t j : cfg.train.hbar.layer_mask)
            mask += (mask.empty() ? "" : " ") + std::to_string(j);
        put_s("hbar.layer_mask", mask);
    }
    put_s("hbar.kernel_sigma_rule",
          cfg.train.kernels.x.sigma_rule == kernels::KernelSpec::SigmaRule::fixed
              ? "fixed"
              : "scaled_sqrt_dim");
    put_d("hbar.kernel_sigma", cfg.train.kernels.x.sigma_value);

    const auto put_attack = [&](const std::string& name, const attacks::AttackConfig& a) {
        const std::string p = "attack." + name + ".";
        put_d(p + "radius", a.radius);
        put_d(p + "step_size", a.step_size);
        put_u(p + "steps", a.steps);
        put_s(p + "loss",
              a.loss == attacks::AttackConfig::Loss::cw_margin ? "cw_margin" : "cross_entropy");
        put_b(p + "random_start", a.random_start);
        put_d(p + "clamp_lo", a.clamp_lo);
        put_d(p + "clamp_hi", a.clamp_hi);
        put_u(p + "seed", a.seed);
    };
    if (cfg.train_attack) put_attack("train", *cfg.train_attack);
    for (const auto& [name, a] : cfg.eval_attacks) put_attack(name, a);

    put_s("eval.primary_attack", cfg.primary_attack);
    put_u("eval.eval_batch", cfg.eval_batch);
    put_b("eval.log_robust", cfg.log_robust);
    put_u("eval.robust_limit", cfg.robust_limit);

    {
        std::string sx, sy;
        for (double v : cfg.sweep_lambda_x) sx += (sx.empty() ? "" : " ") + csv::fmt(v);
        for (double v : cfg.sweep_lambda_y) sy += (sy.empty() ? "" : " ") + csv::fmt(v);
        put_s("sweep.lambda_x", sx);
        put_s("sweep.lambda_y", sy);
    }

    put_d("theorems.lambda_low_x", cfg.theorems.lambda_low_x);
    put_d("theorems.lambda_low_y", cfg.theorems.lambda_low_y);
    put_d("theorems.lambda_high_x", cfg.theorems.lambda_high_x);
    put_d("theorems.lambda_high_y", cfg.theorems.lambda_high_y);
    {
        std::string radii;
        for (double r : cfg.theorems.radii) radii += (radii.empty() ? "" : " ") + csv::fmt(r);
        put_s("theorems.radii", radii);
    }
    put_d("theorems.rho_radius", cfg.theorems.rho_radius);
    put_u("theorems.attack_steps", cfg.theorems.attack_steps);
    put_d("theorems.attack_step_size", cfg.theorems.attack_step_size);
    put_u("theorems.probe_limit", cfg.theorems.probe_limit);

    put_s("output.dir", cfg.out_dir);
    put_s("output.run_name", cfg.run_name);

    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    return out;
}

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

void rehash(ExperimentConfig& cfg) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canonical_text(cfg))));
    cfg.config_hash = buf;
}

}  // namespace hbar::config
