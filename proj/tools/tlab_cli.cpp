// tlab command-line driver: data generation, pretraining, fine-tuning,
// decoding and evaluation.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "tlab/tlab.hpp"

namespace {

using namespace tlab;

// ---------------------------------------------------------------- logging

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

Level log_level() {
    static const Level level = [] {
        const char* env = std::getenv("TLAB_LOG_LEVEL");
        if (!env) return Level::Info;
        const std::string v = to_lower(env);
        if (v == "error" || v == "quiet") return Level::Error;
        if (v == "warn" || v == "warning") return Level::Warn;
        if (v == "debug") return Level::Debug;
        return Level::Info;
    }();
    return level;
}

void log(Level level, const std::string& line) {
    if (level <= log_level()) std::cerr << line << '\n';
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// ------------------------------------------------------------- config file

/// key=value lines; '#' starts a comment.
std::map<std::string, std::string> read_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config file " + path);
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string();
            const auto b = s.find_last_not_of(" \t\r");
            return s.substr(a, b - a + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key=value");
        auto key = trim(line.substr(0, eq));
        std::replace(key.begin(), key.end(), '_', '-');
        out[key] = trim(line.substr(eq + 1));
    }
    return out;
}

bool truthy(const std::string& v) {
    const auto s = to_lower(v);
    if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
    if (s == "0" || s == "false" || s == "no" || s == "off") return false;
    throw std::runtime_error("config: expected a boolean, got '" + v + "'");
}

/// Appends config-file values for every option of the chosen subcommand
/// that was not given on the command line, so flags take precedence.
std::vector<std::string> merge_config(CLI::App& app, std::vector<std::string> args) {
    auto it = std::find(args.begin(), args.end(), "--config");
    std::string path;
    if (it != args.end()) {
        if (it + 1 == args.end()) throw std::runtime_error("--config needs a file path");
        path = *(it + 1);
        args.erase(it, it + 2);
    } else {
        for (auto a = args.begin(); a != args.end(); ++a)
            if (a->rfind("--config=", 0) == 0) {
                path = a->substr(9);
                args.erase(a);
                break;
            }
    }
    if (path.empty() || args.size() < 2) return args;
    const auto kv = read_config(path);

    CLI::App* sub = nullptr;
    for (auto* s : app.get_subcommands({}))
        if (s->get_name() == args[1]) sub = s;
    if (!sub) return args;

    std::set<std::string> known_anywhere;
    for (auto* s : app.get_subcommands({}))
        for (auto* o : s->get_options())
            for (const auto& n : o->get_lnames()) known_anywhere.insert(n);

    std::set<std::string> given;
    for (const auto& a : args)
        if (a.rfind("--", 0) == 0) given.insert(a.substr(2, a.find('=') == std::string::npos ? std::string::npos : a.find('=') - 2));

    for (const auto& [key, value] : kv) {
        if (!known_anywhere.count(key)) throw std::runtime_error("config: unknown key '" + key + "'");
        const CLI::Option* opt = nullptr;
        for (auto* o : sub->get_options())
            for (const auto& n : o->get_lnames())
                if (n == key) opt = o;
        if (!opt || given.count(key)) continue;
        if (opt->get_type_size() == 0) {
            if (truthy(value)) args.push_back("--" + key);
        } else {
            std::istringstream vs(value);
            std::string item;
            std::vector<std::string> items;
            while (vs >> item) items.push_back(item);
            if (items.empty()) throw std::runtime_error("config: empty value for '" + key + "'");
            if (opt->get_expected_max() > 1) {
                args.push_back("--" + key);
                for (auto& v : items) args.push_back(v);
            } else {
                args.push_back("--" + key + "=" + value);
            }
        }
    }
    return args;
}

// ----------------------------------------------------------------- helpers

struct ModelShape {
    std::size_t layers = 2;
    std::size_t hidden = 64;
    std::size_t heads = 4;
};

void add_shape(CLI::App* c, ModelShape& m) {
    c->add_option("--layers", m.layers, "Transformer blocks")->capture_default_str();
    c->add_option("--hidden", m.hidden, "Hidden size")->capture_default_str();
    c->add_option("--heads", m.heads, "Attention heads")->capture_default_str();
}

ModelConfig model_config(const ModelShape& m, std::size_t vocab) {
    ModelConfig c;
    c.layers = m.layers;
    c.hidden = m.hidden;
    c.heads = m.heads;
    c.vocab_size = vocab;
    c.validate();
    return c;
}

void add_train(CLI::App* c, TrainConfig& t) {
    c->add_option("--steps", t.steps, "Optimizer steps")->capture_default_str();
    c->add_option("--batch", t.batch_size, "Batch size")->capture_default_str();
    c->add_option("--lr", t.lr, "Peak learning rate")->capture_default_str();
    c->add_option("--warmup", t.warmup, "Linear warmup steps")->capture_default_str();
    c->add_option("--seed", t.seed, "Random seed")->capture_default_str();
}

void attach_step_log(TrainConfig& t) {
    const std::size_t every = log_level() >= Level::Debug ? 1 : std::max<std::size_t>(1, t.steps / 100);
    t.on_step = [every, total = t.steps](std::size_t step, double loss) {
        if (step % every == 0 || step == total || step == 1)
            log(Level::Info, "step " + std::to_string(step) + " loss " + fmt("%.4f", loss));
    };
}

std::vector<DialogueSample> load_samples(const std::string& path) {
    auto c = load_corpus(path, {}, log_level() >= Level::Warn);
    log(Level::Debug, "loaded " + std::to_string(c.samples.size()) + " samples from " + path);
    return std::move(c.samples);
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        // corpus files carry the reference in the second field
        if (auto tab = line.find('\t'); tab != std::string::npos) line = line.substr(tab + 1);
        out.push_back(line);
    }
    return out;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& l : lines) out << l << '\n';
    if (!out) throw std::runtime_error("failed writing " + path);
}

std::string default_calibration(const std::string& checkpoint) { return checkpoint + ".calib"; }

std::size_t read_calibration(const std::string& path) {
    const auto kv = read_config(path);
    auto it = kv.find("min-len");
    if (it == kv.end()) throw std::runtime_error("calibration file " + path + " has no min_len");
    return std::stoul(it->second);
}

Framework checkpoint_framework(const Checkpoint& c, const std::string& path) {
    if (!c.framework) throw std::runtime_error("checkpoint " + path + " is not fine-tuned (no framework tag)");
    return *c.framework;
}

std::vector<std::vector<int>> encode_sources(const std::vector<DialogueSample>& samples, const Vocab& vocab) {
    std::vector<std::vector<int>> out;
    for (const auto& s : samples) out.push_back(tokenize(s.source_text(), vocab));
    return out;
}

std::size_t default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

// ---------------------------------------------------------------- commands

struct GenerateDataArgs {
    std::string task, out;
    std::size_t size = 1000;
    std::uint64_t seed = 1;
    SynthOptions synth;
};

void cmd_generate_data(const GenerateDataArgs& a) {
    const auto samples = synth_generate(parse_task(a.task), a.size, a.seed, a.synth);
    write_corpus(a.out, samples);
    log(Level::Info, "wrote " + std::to_string(samples.size()) + " " + a.task + " samples to " + a.out);
}

struct VocabArgs {
    std::vector<std::string> corpora;
    std::string out;
    std::size_t min_freq = 1;
};

void cmd_vocab(const VocabArgs& a) {
    std::vector<std::string> texts;
    for (const auto& p : a.corpora) {
        const auto t = corpus_texts(load_samples(p));
        texts.insert(texts.end(), t.begin(), t.end());
    }
    const auto v = build_vocab(texts, a.min_freq);
    v.save(a.out);
    log(Level::Info, "vocab of " + std::to_string(v.size()) + " tokens written to " + a.out);
}

struct PretrainArgs {
    std::string objective = "ar", corpus, vocab, out;
    ModelShape shape;
    TrainConfig train;
};

void cmd_pretrain(PretrainArgs a) {
    const auto obj = parse_objective(a.objective);
    const auto samples = load_samples(a.corpus);
    const auto vocab = Vocab::load(a.vocab);
    attach_step_log(a.train);
    log(Level::Info, "pretraining " + a.objective + " on " + std::to_string(samples.size()) + " samples");
    const auto c = pretrain(model_config(a.shape, vocab.size()), samples, vocab, obj, a.train);
    save_checkpoint(c, a.out);
    log(Level::Info, "saved checkpoint " + a.out);
}

struct FinetuneArgs {
    std::string framework, corpus, vocab, init, out;
    std::optional<std::size_t> subset;
    FinetuneConfig cfg;
    ModelShape shape;
};

void cmd_finetune(FinetuneArgs a) {
    const auto fw = parse_framework(a.framework);
    auto samples = load_samples(a.corpus);
    if (a.subset) {
        if (*a.subset == 0) throw std::runtime_error("--subset must be at least 1");
        if (*a.subset > samples.size())
            throw std::runtime_error("--subset " + std::to_string(*a.subset) + " exceeds corpus of " +
                                     std::to_string(samples.size()) + " samples");
        samples.resize(*a.subset);
    }
    log(Level::Info, "fine-tuning " + a.framework + " on " + std::to_string(samples.size()) + " training samples");
    std::optional<Checkpoint> init;
    Vocab vocab;
    if (!a.init.empty()) {
        init = load_checkpoint(a.init);
        vocab = a.vocab.empty() ? Vocab::from_tokens(init->vocab) : Vocab::load(a.vocab);
    } else {
        if (a.vocab.empty()) throw std::runtime_error("--vocab is required without --init");
        vocab = Vocab::load(a.vocab);
    }
    a.cfg.model = model_config(a.shape, vocab.size());
    attach_step_log(a.cfg.train);
    const auto c = finetune(fw, init, encode_corpus(samples, vocab), vocab, a.cfg);
    save_checkpoint(c, a.out);
    log(Level::Info, "saved checkpoint " + a.out);
}

struct DecodeArgs {
    std::string checkpoint, input, out, calibration;
    std::optional<std::size_t> min_len, interval;
    DecodeParams params;
    std::size_t threads = default_threads();
};

struct LoadedDecoder {
    Checkpoint ckpt;
    Framework framework;
    Vocab vocab;
    DecodeParams params;
};

LoadedDecoder load_decoder(const DecodeArgs& a) {
    LoadedDecoder d{load_checkpoint(a.checkpoint), Framework::Dec, {}, a.params};
    d.framework = checkpoint_framework(d.ckpt, a.checkpoint);
    d.vocab = Vocab::from_tokens(d.ckpt.vocab);
    d.params.interval = a.interval.value_or(d.ckpt.interval);
    d.params.repeatable = punctuation_ids(d.vocab);
    return d;
}

void cmd_generate(const DecodeArgs& a) {
    auto d = load_decoder(a);
    if (a.min_len) {
        d.params.min_len = *a.min_len;
    } else {
        const std::string cal = a.calibration.empty() ? default_calibration(a.checkpoint) : a.calibration;
        if (std::filesystem::exists(cal)) {
            d.params.min_len = read_calibration(cal);
            log(Level::Info, "min_len " + std::to_string(d.params.min_len) + " from " + cal);
        } else if (!a.calibration.empty()) {
            throw std::runtime_error("cannot read calibration file " + cal);
        }
    }
    const auto samples = load_samples(a.input);
    const auto model = d.ckpt.model();
    const auto results = generate_all(model, d.framework, encode_sources(samples, d.vocab), d.params, a.threads);
    std::vector<std::string> lines;
    for (const auto& r : results) lines.push_back(detokenize(r.tokens, d.vocab));
    write_lines(a.out, lines);
    log(Level::Info, "generated " + std::to_string(lines.size()) + " responses avgLen " + fmt("%.2f", mean_length(results)));
}

struct CalibrateArgs {
    DecodeArgs decode;
    std::optional<double> target;
    std::size_t max_min_len = 20;
};

void cmd_calibrate(const CalibrateArgs& a) {
    auto d = load_decoder(a.decode);
    const auto samples = load_samples(a.decode.input);
    double target = 0;
    if (a.target) {
        target = *a.target;
    } else {
        for (const auto& s : samples) target += static_cast<double>(response_length(s));
        target /= static_cast<double>(samples.size());
    }
    const auto cal = calibrate_min_len(d.ckpt.model(), d.framework, encode_sources(samples, d.vocab), target, d.params,
                                       a.max_min_len, a.decode.threads);
    for (const auto& p : cal.sweep)
        log(Level::Info, "min_len " + std::to_string(p.min_len) + " avgLen " + fmt("%.3f", p.avg_len));
    const std::string out = a.decode.out.empty() ? default_calibration(a.decode.checkpoint) : a.decode.out;
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot write calibration file " + out);
    f << "min_len=" << cal.min_len << "\ntarget_avg_len=" << fmt("%.6f", target) << '\n';
    log(Level::Info, "calibrated min_len " + std::to_string(cal.min_len) + " -> " + out);
}

struct EvaluateArgs {
    std::string hyp, ref;
    bool key_values = false;
};

void cmd_evaluate(const EvaluateArgs& a) {
    const auto r = evaluate_text(read_lines(a.hyp), read_lines(a.ref));
    std::cout << (a.key_values ? render_key_values(r) : render_report(r, std::filesystem::path(a.hyp).stem().string()));
}

struct CompareArgs {
    std::string ref;
    std::vector<std::string> systems;
};

void cmd_compare(const CompareArgs& a) {
    const auto refs = read_lines(a.ref);
    std::vector<NamedReport> rows;
    for (const auto& s : a.systems) {
        const auto eq = s.find('=');
        const std::string name = eq == std::string::npos ? std::filesystem::path(s).stem().string() : s.substr(0, eq);
        const std::string path = eq == std::string::npos ? s : s.substr(eq + 1);
        rows.push_back({name, evaluate_text(read_lines(path), refs)});
    }
    std::cout << render_compare(rows);
}

struct MaskArgs {
    std::string framework;
    std::size_t source_len = 3, target_len = 3, interval = 5;
    std::optional<std::size_t> boundary;
};

void cmd_mask(const MaskArgs& a) {
    const auto fw = parse_framework(a.framework);
    LayoutOptions opts;
    const auto layout = build_layout(fw, a.source_len, a.target_len, opts);
    if (a.boundary) {
        if (!uses_intervals(fw)) throw std::runtime_error("--boundary applies only to pf-free and pffg-free");
        std::cout << build_pf_interval_mask(layout, a.interval, *a.boundary).to_text();
        return;
    }
    const auto m = build_framework_mask(layout, fw);
    if (m.encoder) std::cout << "encoder\n" << m.encoder->to_text() << "decoder\n";
    std::cout << m.self.to_text();
    if (m.cross) std::cout << "cross\n" << m.cross->to_text();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tlab: small transformer dialogue-generation lab", "tlab"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");
    app.footer("Every subcommand accepts --config FILE (key=value lines); command-line flags win.\n"
               "Log verbosity: TLAB_LOG_LEVEL=error|warn|info|debug (default info).");

    GenerateDataArgs gd;
    auto* c_gd = app.add_subcommand("generate-data", "Write a synthetic corpus");
    c_gd->add_option("--task", gd.task, "echo | reverse | templated-qa | grammar-lm")->required();
    c_gd->add_option("--size", gd.size, "Number of samples")->capture_default_str();
    c_gd->add_option("--seed", gd.seed, "Random seed")->capture_default_str();
    c_gd->add_option("--min-words", gd.synth.min_words, "Shortest turn")->capture_default_str();
    c_gd->add_option("--max-words", gd.synth.max_words, "Longest turn")->capture_default_str();
    c_gd->add_option("--max-turns", gd.synth.max_turns, "Most history turns")->capture_default_str();
    c_gd->add_option("--out", gd.out, "Output corpus")->required();

    VocabArgs vo;
    auto* c_vo = app.add_subcommand("vocab", "Build a vocabulary from corpus files");
    c_vo->add_option("--corpus", vo.corpora, "Corpus files")->required()->expected(1, -1);
    c_vo->add_option("--min-freq", vo.min_freq, "Drop rarer words")->capture_default_str();
    c_vo->add_option("--out", vo.out, "Output vocab file")->required();

    PretrainArgs pt;
    auto* c_pt = app.add_subcommand("pretrain", "Pretrain a decoder-only model");
    c_pt->add_option("--objective", pt.objective, "ar | mlm")->capture_default_str();
    c_pt->add_option("--corpus", pt.corpus, "Pretraining corpus")->required();
    c_pt->add_option("--vocab", pt.vocab, "Vocab file")->required();
    c_pt->add_option("--out", pt.out, "Output checkpoint")->required();
    add_shape(c_pt, pt.shape);
    add_train(c_pt, pt.train);

    FinetuneArgs ft;
    auto* c_ft = app.add_subcommand("finetune", "Fine-tune one framework");
    c_ft->add_option("--framework", ft.framework, "dec | ed | mlm | ar | pf-free | fg-free | pffg-free")->required();
    c_ft->add_option("--corpus", ft.corpus, "Training corpus")->required();
    c_ft->add_option("--vocab", ft.vocab, "Vocab file (default: the checkpoint's)");
    c_ft->add_option("--init", ft.init, "Pretrained checkpoint (default: random init)");
    c_ft->add_option("--out", ft.out, "Output checkpoint")->required();
    c_ft->add_option("--subset", ft.subset, "Use only the first N samples");
    c_ft->add_flag("--force-lineage", ft.cfg.force_lineage, "Allow a checkpoint from the other pretraining lineage");
    c_ft->add_option("--interval", ft.cfg.example.interval, "Bidirectional interval k")->capture_default_str();
    c_ft->add_option("--mask-rate", ft.cfg.example.mask_rate, "Target corruption rate")->capture_default_str();
    add_shape(c_ft, ft.shape);
    add_train(c_ft, ft.cfg.train);

    auto add_decode = [](CLI::App* c, DecodeArgs& d, bool out_required) {
        c->add_option("--checkpoint", d.checkpoint, "Fine-tuned checkpoint")->required();
        c->add_option("--input", d.input, "Corpus whose histories are decoded")->required();
        auto* o = c->add_option("--out", d.out, "Output file");
        if (out_required) o->required();
        c->add_option("--beam", d.params.beam_size, "Beam size")->capture_default_str();
        c->add_option("--max-len", d.params.max_len, "Longest response")->capture_default_str();
        c->add_option("--interval", d.interval, "Bidirectional interval (default: the checkpoint's)");
        c->add_option("--threads", d.threads, "Worker threads")->capture_default_str();
    };

    DecodeArgs ge;
    auto* c_ge = app.add_subcommand("generate", "Decode responses with beam search");
    add_decode(c_ge, ge, true);
    c_ge->add_option("--min-len", ge.min_len, "Shortest response (default: calibration file, else 1)");
    c_ge->add_option("--calibration", ge.calibration, "Calibration file (default: CHECKPOINT.calib if present)");

    CalibrateArgs ca;
    auto* c_ca = app.add_subcommand("calibrate", "Pick min_len so mean response length matches references");
    add_decode(c_ca, ca.decode, false);
    c_ca->add_option("--target-len", ca.target, "Target mean length (default: mean reference length of --input)");
    c_ca->add_option("--max-min-len", ca.max_min_len, "Largest min_len tried")->capture_default_str();

    EvaluateArgs ev;
    auto* c_ev = app.add_subcommand("evaluate", "Score hypotheses against references");
    c_ev->add_option("--hyp", ev.hyp, "Hypothesis lines")->required();
    c_ev->add_option("--ref", ev.ref, "Reference lines or corpus file")->required();
    c_ev->add_flag("--key-values", ev.key_values, "Print key=value lines instead of a table");

    CompareArgs co;
    auto* c_co = app.add_subcommand("compare", "Compare systems with significance stars");
    c_co->add_option("--ref", co.ref, "Reference lines or corpus file")->required();
    c_co->add_option("--hyp", co.systems, "NAME=FILE per system")->required()->expected(1, -1);

    MaskArgs ma;
    auto* c_ma = app.add_subcommand("mask", "Print a framework's attention mask");
    c_ma->add_option("--framework", ma.framework, "Framework")->required();
    c_ma->add_option("--source-len", ma.source_len, "Source length S")->capture_default_str();
    c_ma->add_option("--target-len", ma.target_len, "Target length T")->capture_default_str();
    c_ma->add_option("--interval", ma.interval, "Interval k")->capture_default_str();
    c_ma->add_option("--boundary", ma.boundary, "PF boundary b (prints the interval mask)");

    for (auto* c : app.get_subcommands({})) c->add_option("--config", "key=value configuration file");

    try {
        std::vector<std::string> args(argv, argv + argc);
        args = merge_config(app, std::move(args));
        std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
        app.parse(std::move(reversed));
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }

    try {
        if (c_gd->parsed()) cmd_generate_data(gd);
        if (c_vo->parsed()) cmd_vocab(vo);
        if (c_pt->parsed()) cmd_pretrain(pt);
        if (c_ft->parsed()) cmd_finetune(ft);
        if (c_ge->parsed()) cmd_generate(ge);
        if (c_ca->parsed()) cmd_calibrate(ca);
        if (c_ev->parsed()) cmd_evaluate(ev);
        if (c_co->parsed()) cmd_compare(co);
        if (c_ma->parsed()) cmd_mask(ma);
    } catch (const std::exception& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        std::cerr << "error: " << msg << '\n';
        return 1;
    }
    return 0;
}
