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

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "hclm/checkpoint.hpp"
#include "hclm/cli.hpp"
#include "hclm/error.hpp"
#include "oracles/fixtures.hpp"

using namespace hclm;
namespace fs = std::filesystem;

namespace {

struct Run
{
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args)
{
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

struct TempDir
{
    fs::path path;
    TempDir()
    {
        static int counter = 0;
        path = fs::temp_directory_path() / ("hclm_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string &name, const std::string &content) const
    {
        std::ofstream(path / name, std::ios::binary) << content;
        return (path / name).string();
    }
    std::string operator/(const std::string &name) const { return (path / name).string(); }
};

std::string slurp(const std::string &p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::string periodic_corpus()
{
    std::string s;
    for (int i = 0; i < 8; ++i)
        s += "abc abc abc\n";
    return s;
}

std::string train_config(const TempDir &d)
{
    return d.file("train.cfg", "# periodic fixture\n"
                               "corpus = " + d.file("corpus.txt", periodic_corpus()) + "\n"
                               "output_dir = " + d / "out" + "\n"
                               "variant = mono\n"
                               "layers = 1\n"
                               "hidden = 12\n"
                               "max_epochs = 60\n"
                               "batch_size = 4\n"
                               "bptt_length = 16\n"
                               "seed = 3\n");
}

} // namespace

TEST_SUITE("cli")
{
    TEST_CASE("train on the periodic fixture")
    {
        TempDir d;
        const std::string cfg = train_config(d);
        const Run r = run({"train", "--config", cfg});
        REQUIRE(r.code == 0);
        CHECK(fs::exists(d / "out/best.ckpt"));
        CHECK(fs::exists(d / "out/last.ckpt"));
        CHECK(fs::exists(d / "out/vocab.txt"));
        const std::string metrics = slurp(d / "out/metrics.csv");
        CHECK(metrics.rfind("epoch,train_bpc,heldout_bpc,seconds\n", 0) == 0);
        std::istringstream lines(metrics);
        std::string line, last;
        while (std::getline(lines, line))
            last = line;
        const double final_bpc = std::stod(last.substr(last.find(',') + 1));
        CHECK(final_bpc < 0.2);

        // Same seed, byte-identical metrics.
        const Run again = run({"train", "--config", cfg, "--output_dir", d / "out2"});
        REQUIRE(again.code == 0);
        CHECK(slurp(d / "out2/metrics.csv") == metrics);

        // Flags override the file.
        const Run shorter = run({"train", "--config", cfg, "--output_dir", d / "out3", "--max_epochs", "2"});
        REQUIRE(shorter.code == 0);
        CHECK(std::count(shorter.out.begin(), shorter.out.end(), '\n') == 3);

        // eval and sample on the trained model
        const Run ev = run({"eval", "--config", cfg, "--checkpoint", d / "out/last.ckpt", "--format", "csv"});
        REQUIRE(ev.code == 0);
        CHECK(ev.out.rfind("size,params,bpc,word_ppl\n1x12,", 0) == 0);

        const Run s1 = run({"sample", "--checkpoint", d / "out/last.ckpt", "--length", "30", "--seed", "4"});
        const Run s2 = run({"sample", "--checkpoint", d / "out/last.ckpt", "--length", "30", "--seed", "4"});
        REQUIRE(s1.code == 0);
        CHECK(s1.out == s2.out);
        CHECK_FALSE(s1.out.empty());
    }

    TEST_CASE("missing corpus names the path")
    {
        const Run r = run({"train", "--corpus", "/nonexistent/hclm/corpus.txt"});
        CHECK(r.code == 2);
        CHECK(r.err.find("/nonexistent/hclm/corpus.txt") != std::string::npos);
        CHECK(run({"train"}).code == 1);
    }

    TEST_CASE("usage errors")
    {
        TempDir d;
        CHECK(run({}).code == 1);
        CHECK(run({"frobnicate"}).code == 1);
        CHECK(run({"train", "--no_such_flag", "1"}).code == 1);
        const std::string cfg = d.file("bad.cfg", "corpus = x\nhiden = 4\n");
        CHECK(run({"train", "--config", cfg}).code == 1);
        CHECK(run({"train", "--config", d / "absent.cfg"}).code == 1);
        CHECK(run({"--help"}).code == 0);
        const std::string corpus = d.file("c.txt", "ab\n");
        CHECK(run({"train", "--corpus", corpus, "--variant", "hlstm_b", "--layers", "3"}).code == 1);
        CHECK(run({"train", "--corpus", corpus, "--adadelta_rho", "1.5"}).code == 1);
    }

    TEST_CASE("eval of a zero-parameter checkpoint")
    {
        TempDir d;
        const Vocabulary v = fixture::letters(2);
        Network net{make_network_spec(Variant::hlstm_b, 4, 3, v), {}};
        net.params = zero_params(net.spec);
        save_checkpoint(d / "zero.ckpt", net, v);
        const std::string text = "ab ba\nb a b\n";
        const std::string held = d.file("held.txt", text);
        const Run r = run({"eval", "--checkpoint", d / "zero.ckpt", "--heldout", held, "--format", "csv"});
        REQUIRE(r.code == 0);
        std::istringstream in(r.out);
        std::string header, row;
        std::getline(in, header);
        std::getline(in, row);
        CHECK(std::count(row.begin(), row.end(), ',') == 3);
        const auto c2 = row.find(',', row.find(',') + 1);
        const auto c3 = row.find(',', c2 + 1);
        CHECK(std::stod(row.substr(c2 + 1, c3 - c2 - 1)) == 2.0);
        std::size_t nc = 0, nw = 0;
        for (const auto &s : tokenize_lines(text, v)) {
            nc += s.char_count;
            nw += s.word_count;
        }
        const double ppl = std::exp2(2.0 * static_cast<double>(nc) / static_cast<double>(nw));
        CHECK(std::stod(row.substr(c3 + 1)) == doctest::Approx(ppl).epsilon(1e-4));

        const Run table = run({"eval", "--checkpoint", d / "zero.ckpt", "--heldout", held});
        CHECK(table.code == 0);
        CHECK(table.out.find("2.0000") != std::string::npos);
    }

    TEST_CASE("corrupted checkpoint is a format error")
    {
        TempDir d;
        const std::string held = d.file("held.txt", "ab\n");
        const std::string bad = d.file("bad.ckpt", "NOTACHECKPOINT");
        const Run r = run({"eval", "--checkpoint", bad, "--heldout", held});
        CHECK(r.code == 2);
        CHECK_FALSE(r.err.empty());
    }

    TEST_CASE("decode a single frame")
    {
        TempDir d;
        const Vocabulary v = fixture::letters(2);
        Network net{make_network_spec(Variant::mono, 1, 3, v), {}};
        net.params = zero_params(net.spec);
        save_checkpoint(d / "lm.ckpt", net, v);
        const std::string post = d.file("post.txt", "1 2 <blank> a\n0.1 0.9\n");
        const Run r = run({"decode", "--checkpoint", d / "lm.ckpt", "--posteriors", post, "--nbest", "2",
                           "--nbest_file", d / "nbest.csv", "--reference", "a"});
        REQUIRE(r.code == 0);
        CHECK(r.out == "a\n");
        CHECK(r.err.find("WER 0.0000") != std::string::npos);
        CHECK(slurp(d / "nbest.csv").rfind("rank,transcript", 0) == 0);

        const std::string bad = d.file("bad.txt", "1 2 <blank> a\n0.5 0.9\n");
        CHECK(run({"decode", "--checkpoint", d / "lm.ckpt", "--posteriors", bad}).code == 2);
        const std::string oov = d.file("oov.txt", "1 2 <blank> z\n0.5 0.5\n");
        CHECK(run({"decode", "--checkpoint", d / "lm.ckpt", "--posteriors", oov}).code == 1);
    }

    TEST_CASE("gradcheck exit status follows the tolerance")
    {
        TempDir d;
        const std::string corpus = d.file("c.txt", "ab ba\nb a\n");
        const std::vector<std::string> base{"gradcheck", "--corpus", corpus, "--variant", "hlstm_b", "--layers", "4",
                                            "--hidden", "4", "--gradcheck_length", "10"};
        const Run ok = run(base);
        CHECK(ok.code == 0);
        CHECK(ok.out.find("PASS") != std::string::npos);
        const auto pos = ok.out.find("max_rel_error ");
        REQUIRE(pos != std::string::npos);
        CHECK(std::stod(ok.out.substr(pos + 14)) <= 1e-4);

        auto strict = base;
        strict.insert(strict.end(), {"--tolerance", "1e-14", "--fd_step", "1e-2"});
        const Run fail = run(strict);
        CHECK(fail.code == 3);
        CHECK(fail.out.find("FAIL") != std::string::npos);
    }
}
