/*
   Copyright 2026 The hclm Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#include "hclm/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "hclm/checkpoint.hpp"
#include "hclm/corpus.hpp"
#include "hclm/decode.hpp"
#include "hclm/error.hpp"
#include "hclm/eval.hpp"
#include "hclm/hierarchy.hpp"
#include "hclm/training.hpp"

namespace hclm {
namespace {

namespace fs = std::filesystem;

struct RunConfig
{
    // paths
    std::string corpus;
    std::string heldout;
    std::string vocab;
    std::string checkpoint;
    std::string posteriors;
    std::string output_dir = ".";
    std::string nbest_file;
    std::string reference;

    // text handling
    std::string token_mode = "char";
    bool uppercase = false;
    double heldout_fraction = 0.0;

    // network
    std::string variant = "hlstm_b";
    std::size_t layers = 4;
    std::size_t hidden = 512;
    std::string peephole = "diagonal";

    // training
    TrainConfig train;
    double clip_norm = 5.0; // 0 disables clipping
    bool timing = false;

    // eval
    std::string format = "table";

    // sample
    std::string prime;
    std::size_t length = 200;
    double temperature = 1.0;

    // decode
    DecodeConfig decode;
    std::string insertion_unit = "char";

    // gradcheck
    double tolerance = 1e-4;
    double fd_step = 1e-5;
    std::size_t gradcheck_length = 12;
};

std::string load_text(const std::string &path, bool uppercase)
{
    std::string text = read_text_file(path);
    return uppercase ? to_upper_ascii(text) : text;
}

void require(const std::string &value, const char *key, const char *command)
{
    if (value.empty())
        throw ConfigError(std::string(command) + " requires '" + key + "'");
}

void require_file(const std::string &path, const char *key)
{
    if (!fs::exists(path))
        throw DataError(std::string(key) + " path does not exist: " + path);
}

std::string fmt(const char *pattern, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

NetworkSpec spec_from(const RunConfig &cfg, const Vocabulary &vocab)
{
    return make_network_spec(parse_variant(cfg.variant), cfg.layers, cfg.hidden, vocab,
                             parse_peephole(cfg.peephole));
}

Vocabulary vocab_for(const RunConfig &cfg, const std::string &text)
{
    if (!cfg.vocab.empty()) {
        require_file(cfg.vocab, "vocab");
        return Vocabulary::load(cfg.vocab);
    }
    return build_vocab(text, parse_token_mode(cfg.token_mode));
}

void cmd_train(const RunConfig &cfg, std::ostream &out)
{
    require(cfg.corpus, "corpus", "train");
    require_file(cfg.corpus, "corpus");
    const std::string train_text = load_text(cfg.corpus, cfg.uppercase);
    std::string heldout_text;
    if (!cfg.heldout.empty()) {
        require_file(cfg.heldout, "heldout");
        heldout_text = load_text(cfg.heldout, cfg.uppercase);
    }
    const Vocabulary vocab = vocab_for(cfg, train_text + "\n" + heldout_text);

    std::vector<TokenSequence> train_set = tokenize_lines(train_text, vocab);
    std::vector<TokenSequence> heldout_set;
    if (!heldout_text.empty())
        heldout_set = tokenize_lines(heldout_text, vocab);
    else if (cfg.heldout_fraction > 0.0)
        std::tie(train_set, heldout_set) = split_heldout(train_set, cfg.heldout_fraction);

    TrainConfig tc = cfg.train;
    tc.clip_norm = cfg.clip_norm > 0.0 ? std::optional<double>(cfg.clip_norm) : std::nullopt;
    const NetworkSpec spec = spec_from(cfg, vocab);

    const fs::path dir = cfg.output_dir;
    fs::create_directories(dir);
    vocab.save(dir / "vocab.txt");
    std::ofstream metrics(dir / "metrics.csv", std::ios::binary | std::ios::trunc);
    if (!metrics)
        throw DataError("cannot write " + (dir / "metrics.csv").string());
    metrics << "epoch,train_bpc,heldout_bpc,seconds\n";

    TrainHooks hooks;
    hooks.on_epoch = [&](const EpochMetrics &m, const Network &net, bool improved) {
        const double secs = cfg.timing ? m.seconds : 0.0;
        metrics << m.epoch << ',' << fmt("%.9f", m.train_bpc) << ','
                << (std::isnan(m.heldout_bpc) ? std::string() : fmt("%.9f", m.heldout_bpc)) << ','
                << fmt("%.3f", secs) << '\n';
        metrics.flush();
        out << "epoch " << m.epoch << " train_bpc " << fmt("%.6f", m.train_bpc);
        if (!std::isnan(m.heldout_bpc))
            out << " heldout_bpc " << fmt("%.6f", m.heldout_bpc);
        out << (improved ? " *" : "") << '\n';
        if (improved)
            save_checkpoint(dir / "best.ckpt", net, vocab);
    };
    const TrainResult result = train(spec, train_set, heldout_set, tc, hooks);
    save_checkpoint(dir / "last.ckpt", result.last, vocab);
    out << "parameters " << result.last.params.parameter_count() << " (" << spec.size_label() << ")\n";
}

void cmd_eval(const RunConfig &cfg, std::ostream &out)
{
    require(cfg.checkpoint, "checkpoint", "eval");
    require_file(cfg.checkpoint, "checkpoint");
    const std::string &path = cfg.heldout.empty() ? cfg.corpus : cfg.heldout;
    require(path, "heldout", "eval");
    require_file(path, "heldout");
    const Checkpoint ckpt = load_checkpoint(cfg.checkpoint);
    const auto sequences = tokenize_lines(load_text(path, cfg.uppercase), ckpt.vocab);
    const EvalReport report = evaluate(ckpt.network, sequences);
    if (cfg.format == "table")
        out << format_report_table(report, ckpt.network);
    else if (cfg.format == "csv")
        out << format_report_csv(report, ckpt.network, true);
    else
        throw ConfigError("unknown format '" + cfg.format + "' (expected table or csv)");
}

void cmd_sample(const RunConfig &cfg, std::ostream &out)
{
    require(cfg.checkpoint, "checkpoint", "sample");
    require_file(cfg.checkpoint, "checkpoint");
    const Checkpoint ckpt = load_checkpoint(cfg.checkpoint);
    const std::string prime = cfg.uppercase ? to_upper_ascii(cfg.prime) : cfg.prime;
    out << sample_text(ckpt.network, ckpt.vocab, prime, cfg.length, cfg.temperature, cfg.train.seed) << '\n';
}

void cmd_decode(const RunConfig &cfg, std::ostream &out, std::ostream &err)
{
    require(cfg.checkpoint, "checkpoint", "decode");
    require(cfg.posteriors, "posteriors", "decode");
    require_file(cfg.checkpoint, "checkpoint");
    require_file(cfg.posteriors, "posteriors");
    DecodeConfig dc = cfg.decode;
    dc.insertion_unit = parse_insertion_unit(cfg.insertion_unit);
    dc.validate();
    const Checkpoint ckpt = load_checkpoint(cfg.checkpoint);
    const PosteriorMatrix post = load_posteriors(cfg.posteriors);
    const auto hyps = beam_search(post, ckpt.network, ckpt.vocab, dc);
    if (hyps.empty())
        throw DataError("decoding produced no hypothesis");
    const std::string best = transcript(hyps.front(), ckpt.vocab);
    out << best << '\n';
    if (!cfg.nbest_file.empty()) {
        const std::size_t n = std::min(dc.nbest, hyps.size());
        std::ofstream f(cfg.nbest_file, std::ios::binary | std::ios::trunc);
        if (!f)
            throw DataError("cannot write " + cfg.nbest_file);
        f << format_nbest_csv(std::span(hyps).first(n), ckpt.vocab, dc);
    }
    if (!cfg.reference.empty()) {
        const auto ref = split_words(cfg.reference);
        const auto hyp = split_words(best);
        err << "WER " << fmt("%.4f", wer(ref, hyp)) << '\n';
    }
}

int cmd_gradcheck(const RunConfig &cfg, std::ostream &out)
{
    Network net;
    std::vector<int> ids;
    if (!cfg.checkpoint.empty()) {
        require_file(cfg.checkpoint, "checkpoint");
        Checkpoint ckpt = load_checkpoint(cfg.checkpoint);
        require(cfg.corpus, "corpus", "gradcheck");
        require_file(cfg.corpus, "corpus");
        ids = tokenize(load_text(cfg.corpus, cfg.uppercase), ckpt.vocab).ids;
        net = std::move(ckpt.network);
    } else {
        require(cfg.corpus, "corpus", "gradcheck");
        require_file(cfg.corpus, "corpus");
        const std::string text = load_text(cfg.corpus, cfg.uppercase);
        const Vocabulary vocab = vocab_for(cfg, text);
        ids = tokenize(text, vocab).ids;
        net.spec = spec_from(cfg, vocab);
        net.params = build_network(net.spec, cfg.train.seed);
    }
    if (ids.size() > cfg.gradcheck_length)
        ids.resize(cfg.gradcheck_length);
    if (ids.size() < 2)
        throw DataError("gradcheck needs at least two tokens");
    const GradCheckReport r = gradient_check(net, ids, cfg.tolerance, cfg.fd_step);
    out << "checked " << r.checked << " max_rel_error " << fmt("%.3e", r.max_rel_error) << " max_abs_error "
        << fmt("%.3e", r.max_abs_error) << " worst " << r.worst_block << '[' << r.worst_index << "] "
        << (r.passed ? "PASS" : "FAIL") << '\n';
    return r.passed ? 0 : static_cast<int>(ErrorCategory::numeric);
}

void add_options(CLI::App &app, RunConfig &c)
{
    app.add_option("--corpus", c.corpus, "training text, one sentence per line");
    app.add_option("--heldout", c.heldout, "held-out text (eval reads this, falling back to corpus)");
    app.add_option("--vocab", c.vocab, "vocabulary file; built from the text when absent");
    app.add_option("--checkpoint", c.checkpoint, "model checkpoint");
    app.add_option("--posteriors", c.posteriors, "frame posterior matrix (text or binary)");
    app.add_option("--output_dir", c.output_dir, "directory for training artifacts");
    app.add_option("--nbest_file", c.nbest_file, "write the n-best list as CSV here");
    app.add_option("--reference", c.reference, "reference transcript; reports WER on stderr");

    app.add_option("--token_mode", c.token_mode, "char or byte")->check(CLI::IsMember({"char", "byte"}));
    app.add_option("--uppercase", c.uppercase, "uppercase ASCII letters before tokenizing");
    app.add_option("--heldout_fraction", c.heldout_fraction, "held-out share of corpus lines without --heldout")
        ->check(CLI::Range(0.0, 0.99));

    app.add_option("--variant", c.variant, "mono, hlstm_a or hlstm_b");
    app.add_option("--layers", c.layers, "total LSTM layers")->check(CLI::PositiveNumber);
    app.add_option("--hidden", c.hidden, "cells per layer")->check(CLI::PositiveNumber);
    app.add_option("--peephole", c.peephole, "diagonal or full");

    TrainConfig &t = c.train;
    app.add_option("--bptt_length", t.bptt_length, "truncated BPTT window");
    app.add_option("--batch_size", t.batch_size, "parallel streams");
    app.add_option("--adadelta_rho", t.adadelta_rho, "ADADELTA decay");
    app.add_option("--adadelta_eps", t.adadelta_eps, "ADADELTA epsilon");
    app.add_option("--momentum", t.momentum, "Nesterov momentum");
    app.add_option("--max_epochs", t.max_epochs, "training epochs");
    app.add_option("--clip_norm", c.clip_norm, "global gradient norm bound, 0 disables");
    app.add_option("--shuffle", t.shuffle, "shuffle sequences every epoch");
    app.add_option("--timing", c.timing, "record wall-clock seconds in metrics.csv");
    app.add_option("--seed", t.seed, "seed for initialization, shuffling and sampling");
    app.add_option("--threads", t.threads, "worker threads")->check(CLI::PositiveNumber);

    app.add_option("--format", c.format, "eval output: table or csv");

    app.add_option("--prime", c.prime, "text fed before sampling");
    app.add_option("--length", c.length, "tokens to sample");
    app.add_option("--temperature", c.temperature, "sampling temperature");

    DecodeConfig &d = c.decode;
    app.add_option("--beam_width", d.beam_width, "hypotheses kept per frame");
    app.add_option("--lm_weight", d.lm_weight, "language model weight");
    app.add_option("--insertion_bonus", d.insertion_bonus, "bonus per inserted unit");
    app.add_option("--width_prune", d.width_prune, "minimum frame posterior for an extension");
    app.add_option("--depth_prune", d.depth_prune, "extensions per frame, 0 = all");
    app.add_option("--insertion_unit", c.insertion_unit, "char or word");
    app.add_option("--nbest", d.nbest, "n-best entries written to nbest_file");

    app.add_option("--tolerance", c.tolerance, "gradcheck relative error bound");
    app.add_option("--fd_step", c.fd_step, "finite-difference step");
    app.add_option("--gradcheck_length", c.gradcheck_length, "tokens of the corpus used by gradcheck");
}

} // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err)
{
    CLI::App app{"Hierarchical character-level language models", "hclm"};
    RunConfig cfg;
    app.set_config("--config", "", "key=value configuration file");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(1);
    add_options(app, cfg);

    auto *train_cmd = app.add_subcommand("train", "train a model; writes checkpoints and metrics.csv");
    auto *eval_cmd = app.add_subcommand("eval", "report BPC and word perplexity");
    auto *sample_cmd = app.add_subcommand("sample", "generate text");
    auto *decode_cmd = app.add_subcommand("decode", "CTC beam search with the language model");
    auto *grad_cmd = app.add_subcommand("gradcheck", "compare gradients with finite differences");
    for (auto *sub : {train_cmd, eval_cmd, sample_cmd, decode_cmd, grad_cmd})
        sub->fallthrough();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : static_cast<int>(ErrorCategory::usage);
    }

    try {
        cfg.train.validate();
        if (*train_cmd)
            cmd_train(cfg, out);
        else if (*eval_cmd)
            cmd_eval(cfg, out);
        else if (*sample_cmd)
            cmd_sample(cfg, out);
        else if (*decode_cmd)
            cmd_decode(cfg, out, err);
        else
            return cmd_gradcheck(cfg, out);
    } catch (const Error &e) {
        err << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const fs::filesystem_error &e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(ErrorCategory::data);
    } catch (const std::exception &e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(ErrorCategory::data);
    }
    return 0;
}

int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err)
{
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i)
        args.emplace_back(argv[i]);
    return run_cli(args, out, err);
}

} // namespace hclm
