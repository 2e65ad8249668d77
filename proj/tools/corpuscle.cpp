// corpuscle: corpus curation and zero-shot evaluation toolkit.
// Exit codes: 0 success, 1 user error, 2 pipeline failure.

#include <glob.h>

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <thread>

#include "corpuscle/backends.hpp"
#include "corpuscle/bpe.hpp"
#include "corpuscle/corpus.hpp"
#include "corpuscle/filtering.hpp"
#include "corpuscle/metrics.hpp"
#include "corpuscle/packing.hpp"
#include "corpuscle/scoring.hpp"
#include "corpuscle/tasks.hpp"
#include "corpuscle/toxicity.hpp"

namespace {

using nlohmann::json;

std::vector<std::string> expand_glob(const std::string& pattern) {
    glob_t g{};
    std::vector<std::string> files;
    if (::glob(pattern.c_str(), 0, nullptr, &g) == 0) {
        for (size_t i = 0; i < g.gl_pathc; ++i) files.emplace_back(g.gl_pathv[i]);
    }
    globfree(&g);
    std::sort(files.begin(), files.end());
    return files;
}

std::string shard_name(const char* prefix, int64_t index) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s-%05lld.jsonl", prefix, static_cast<long long>(index));
    return buf;
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

// Configuration file support: a flat JSON object whose keys mirror the long
// flag names (dashes or underscores). Precedence: defaults < file < env <
// flags; unknown keys are rejected.
class ConfigFile {
  public:
    static ConfigFile load_from_argv(int argc, char** argv) {
        ConfigFile c;
        for (int i = 1; i + 1 < argc; ++i) {
            if (std::string(argv[i]) == "--config") {
                std::ifstream in(argv[i + 1]);
                if (!in) throw CLI::FileError::Missing(argv[i + 1]);
                c.values_ = json::parse(in);
                if (!c.values_.is_object())
                    throw CLI::ValidationError("--config must contain a JSON object");
            }
        }
        return c;
    }

    // Applies a config value as the option default when present.
    void apply(CLI::Option* opt, const std::string& key) {
        known_.insert(key);
        if (!values_.contains(key)) return;
        const auto& v = values_[key];
        opt->default_val(v.is_string() ? v.get<std::string>() : v.dump());
    }

    void reject_unknown() const {
        for (const auto& [k, v] : values_.items())
            if (!known_.count(k))
                throw CLI::ValidationError("unknown config key: " + k);
    }

  private:
    json values_ = json::object();
    std::set<std::string> known_;
};

corpuscle::bpe::BpeVocab load_vocab_or_fail(const std::string& vocab,
                                            const std::string& merges) {
    if (vocab.empty() || merges.empty())
        throw CLI::ValidationError("--vocab and --merges are required for this subcommand");
    return corpuscle::bpe::BpeVocab::load(vocab, merges);
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

// ---------------------------------------------------------------------------

int cmd_ingest(const std::string& input, const std::string& out_dir) {
    const auto files = expand_glob(input);
    if (files.empty()) throw CLI::ValidationError("no input files match " + input);
    std::filesystem::create_directories(out_dir);
    int64_t total_docs = 0, total_skipped = 0, total_malformed = 0;
    for (size_t shard = 0; shard < files.size(); ++shard) {
        corpuscle::corpus::ShardReader reader(files[shard], static_cast<int64_t>(shard));
        std::ofstream out(std::filesystem::path(out_dir) /
                          shard_name("shard", static_cast<int64_t>(shard)));
        while (auto doc = reader.next()) {
            json j;
            j["id"] = doc->id;
            if (doc->url) j["url"] = *doc->url;
            j["text"] = doc->text;
            out << j.dump() << "\n";
        }
        total_docs += reader.stats().documents;
        total_skipped += reader.stats().skipped_empty;
        total_malformed += reader.stats().malformed;
    }
    std::cerr << "ingest: " << files.size() << " shards, " << total_docs << " documents, "
              << total_skipped << " empty skipped, " << total_malformed << " malformed\n";
    return 0;
}

int cmd_score(const std::string& input_dir, const std::string& scorer_url,
              int64_t batch_size, const std::string& out_dir,
              const corpuscle::corpus::ChunkPolicy& policy,
              const std::vector<std::string>& lexicon) {
    auto scorer = corpuscle::scoring::make_scorer(scorer_url, lexicon);
    std::filesystem::create_directories(out_dir);
    int64_t shards = 0;
    for (const auto& entry : std::filesystem::directory_iterator(input_dir)) {
        if (!entry.is_regular_file()) continue;
        const int64_t shard = corpuscle::filtering::shard_index_from_name(entry.path());
        if (shard < 0) continue;
        std::ofstream out(std::filesystem::path(out_dir) / shard_name("scores", shard));
        corpuscle::corpus::ShardReader reader(entry.path(), shard);
        while (auto doc = reader.next()) {
            const auto chunks = corpuscle::corpus::chunk_document(*doc, policy);
            const auto chunk_scores =
                corpuscle::scoring::score_chunks(chunks, *scorer, batch_size);
            const auto doc_score =
                corpuscle::scoring::aggregate_document_scores(*doc, chunk_scores);
            out << corpuscle::filtering::doc_score_to_json(doc_score) << "\n";
        }
        ++shards;
    }
    if (shards == 0) throw CLI::ValidationError("no corpus shards found in " + input_dir);
    std::cerr << "score: " << shards << " shards scored\n";
    return 0;
}

int cmd_pack(const std::string& corpus_dir, const std::string& vocab_path,
             const std::string& merges_path, int64_t sample_len, const std::string& out_path,
             bool separator_eot) {
    const auto vocab = load_vocab_or_fail(vocab_path, merges_path);
    std::optional<int> sep;
    if (separator_eot) {
        if (vocab.end_of_text_id() < 0)
            throw std::runtime_error("vocab has no <|endoftext|> token");
        sep = vocab.end_of_text_id();
    }
    corpuscle::packing::Packer packer(sample_len, sep);
    corpuscle::packing::PackWriter writer(out_path, sample_len, vocab.size());

    std::vector<std::filesystem::path> shards;
    for (const auto& e : std::filesystem::directory_iterator(corpus_dir))
        if (e.is_regular_file() &&
            corpuscle::filtering::shard_index_from_name(e.path()) >= 0)
            shards.push_back(e.path());
    std::sort(shards.begin(), shards.end());
    if (shards.empty()) throw CLI::ValidationError("no corpus shards found in " + corpus_dir);

    for (const auto& path : shards) {
        corpuscle::corpus::ShardReader reader(
            path, corpuscle::filtering::shard_index_from_name(path));
        while (auto doc = reader.next()) {
            const std::string normalized = corpuscle::corpus::normalize_text(doc->text);
            if (normalized.empty()) continue;
            const auto ids = corpuscle::bpe::encode(normalized, vocab);
            packer.feed(ids, [&](corpuscle::packing::PackedSample&& s) { writer.write(s); });
        }
    }
    writer.close();
    std::cerr << "pack: " << writer.sample_count() << " samples of " << sample_len
              << " tokens, " << packer.pending() << " tail tokens dropped\n";
    return 0;
}

int cmd_eval(const std::string& task, const std::string& data, const std::string& backend_url,
             int context_size, uint64_t seed, const std::string& report_path,
             const std::string& vocab_path, const std::string& merges_path, int64_t max_items,
             bool no_answer_head, int stride, const std::string& source_label,
             const std::string& target_label, const std::string& sum_suffix) {
    const auto vocab = load_vocab_or_fail(vocab_path, merges_path);
    auto backend = corpuscle::backends::make_backend(backend_url, &vocab, context_size);

    auto spec = corpuscle::tasks::TaskSpec::resolve(task, data, context_size, seed);
    spec.max_items = max_items;
    spec.no_answer_head = no_answer_head;
    spec.stride = stride;
    if (!source_label.empty()) spec.source_label = source_label;
    if (!target_label.empty()) spec.target_label = target_label;
    if (!sum_suffix.empty()) spec.summarization_suffix = sum_suffix;

    const auto report = corpuscle::tasks::run_task(spec, *backend, vocab);
    write_file(report_path, report.to_json() + "\n");
    std::cerr << "eval: " << task << " n=" << report.n_items
              << " failed=" << report.failed_items << "\n";
    if (report.n_items > 0 && report.failed_items * 20 > report.n_items) {
        std::cerr << "eval: more than 5% of items failed\n";
        return 2;
    }
    return 0;
}

int cmd_tox(const std::string& mode, const std::string& backend_url,
            const std::string& scorer_url, int64_t n, uint64_t seed,
            const std::string& out_dir, const std::string& prompts_path,
            const std::string& vocab_path, const std::string& merges_path,
            int64_t iterations, int context_size, int64_t completions_per_prompt,
            const std::vector<std::string>& lexicon) {
    const auto vocab = load_vocab_or_fail(vocab_path, merges_path);
    auto backend = corpuscle::backends::make_backend(backend_url, &vocab, context_size);
    auto scorer = corpuscle::scoring::make_scorer(scorer_url, lexicon);
    std::filesystem::create_directories(out_dir);

    if (mode == "unprompted") {
        const auto result =
            corpuscle::toxicity::run_unprompted(*backend, *scorer, n, seed, iterations);
        write_file((std::filesystem::path(out_dir) / "curve.csv").string(), result.to_csv());
        std::cerr << "tox: unprompted curve over " << n << " generations written\n";
        return 0;
    }
    if (mode == "prompted") {
        if (prompts_path.empty())
            throw CLI::ValidationError("--prompts is required in prompted mode");
        corpuscle::toxicity::PromptedConfig config;
        config.seed = seed;
        config.iterations = iterations;
        config.completions_per_prompt = completions_per_prompt;
        std::ifstream in(prompts_path);
        if (!in) throw CLI::FileError::Missing(prompts_path);
        std::string line;
        while (std::getline(in, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            config.prompts.push_back(json::parse(line).at("text").get<std::string>());
        }
        const auto result = corpuscle::toxicity::run_prompted(config, *backend, *scorer);
        write_file((std::filesystem::path(out_dir) / "table.json").string(),
                   result.to_json() + "\n");
        std::cerr << "tox: " << result.table_line("prompted") << "\n";
        return 0;
    }
    throw CLI::ValidationError("--mode must be unprompted or prompted");
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out_prefix) {
    json summary;
    summary["tasks"] = json::array();
    std::string md = "| task | n | metric | value |\n|---|---|---|---|\n";
    for (const auto& path : inputs) {
        std::ifstream in(path);
        if (!in) throw CLI::FileError::Missing(path);
        json r = json::parse(in);
        json row;
        row["task"] = r.value("task", std::string("?"));
        row["n_items"] = r.value("n_items", 0);
        row["metrics"] = r.value("metrics", json::object());
        summary["tasks"].push_back(row);
        for (const auto& [k, v] : row["metrics"].items()) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.4f", v.get<double>());
            md += "| " + row["task"].get<std::string>() + " | " +
                  std::to_string(row["n_items"].get<int64_t>()) + " | " + k + " | " + buf +
                  " |\n";
        }
    }
    write_file(out_prefix + ".json", summary.dump(2) + "\n");
    write_file(out_prefix + ".md", md);
    std::cerr << "report: merged " << inputs.size() << " reports into " << out_prefix
              << ".{json,md}\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"corpus curation and zero-shot evaluation toolkit", "corpuscle"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON configuration file");

    try {
        ConfigFile config = ConfigFile::load_from_argv(argc, argv);

        // shared settings
        uint64_t seed = 42;
        int jobs = static_cast<int>(std::thread::hardware_concurrency());
        int context_size = 2048;
        std::string vocab, merges, backend_url, scorer_url, stub_lexicon = "toxique";

        auto add_common = [&](CLI::App* sub, bool needs_vocab) {
            config.apply(sub->add_option("--seed", seed, "master random seed")
                             ->envname("CORPUSCLE_SEED"),
                         "seed");
            config.apply(sub->add_option("--jobs", jobs, "worker count")
                             ->envname("CORPUSCLE_JOBS"),
                         "jobs");
            if (needs_vocab) {
                config.apply(sub->add_option("--vocab", vocab, "vocab.json path")
                                 ->envname("CORPUSCLE_VOCAB"),
                             "vocab");
                config.apply(sub->add_option("--merges", merges, "merges.txt path")
                                 ->envname("CORPUSCLE_MERGES"),
                             "merges");
            }
        };

        // ingest
        auto* ingest = app.add_subcommand("ingest", "ingest JSONL(.gz) shards");
        std::string in_glob, out_dir;
        ingest->add_option("--input", in_glob, "input glob")->required();
        ingest->add_option("--out", out_dir, "output directory")->required();
        add_common(ingest, false);

        // score
        auto* score = app.add_subcommand("score", "toxicity+loss scoring");
        std::string score_in, score_out;
        int64_t batch_size = 32;
        score->add_option("--input", score_in, "ingested corpus directory")->required();
        config.apply(score->add_option("--scorer-url", scorer_url,
                                       "scorer service URL or stub:")
                         ->required()
                         ->envname("CORPUSCLE_SCORER_URL"),
                     "scorer_url");
        score->add_option("--batch-size", batch_size, "scoring batch size");
        score->add_option("--out", score_out, "score store directory")->required();
        corpuscle::corpus::ChunkPolicy chunk_policy;
        score->add_option("--max-chars", chunk_policy.max_chars, "chunk size");
        score->add_option("--min-scorable-chars", chunk_policy.min_scorable_chars,
                          "minimum scorable chunk size");
        score->add_option("--stub-lexicon", stub_lexicon, "comma-separated stub lexicon");
        add_common(score, false);

        // filter
        auto* filter = app.add_subcommand("filter", "apply the keep/remove policy");
        std::string f_corpus, f_scores, f_out, f_report;
        corpuscle::filtering::FilterPolicy policy;
        filter->add_option("--corpus", f_corpus, "corpus directory")->required();
        filter->add_option("--scores", f_scores, "score store directory")->required();
        filter->add_option("--toxicity-max", policy.toxicity_max, "toxicity threshold");
        filter->add_option("--loss-quantile", policy.loss_low_quantile, "low-loss quantile");
        filter->add_option("--loss-abs-max", policy.loss_abs_max, "absolute loss cap");
        filter->add_option("--out", f_out, "filtered corpus directory")->required();
        filter->add_option("--report", f_report, "report JSON path")->required();
        add_common(filter, false);

        // pack
        auto* pack = app.add_subcommand("pack", "tokenize and pack training samples");
        std::string p_corpus, p_out;
        int64_t sample_len = 2049;
        bool separator_eot = false;
        pack->add_option("--corpus", p_corpus, "corpus directory")->required();
        pack->add_option("--sample-len", sample_len, "tokens per sample");
        pack->add_option("--out", p_out, "output .bin path")->required();
        pack->add_flag("--separator-eot", separator_eot,
                       "append <|endoftext|> after each document");
        add_common(pack, true);

        // eval
        auto* eval = app.add_subcommand("eval", "run a zero-shot benchmark");
        std::string task, data, report_path, source_label, target_label, sum_suffix;
        int64_t max_items = 0;
        bool no_answer_head = false;
        int stride = 512;
        eval->add_option("--task", task, "wikitext_ppl|orangesum|fquad|wmt14_en_fr|wmt14_fr_en")
            ->required();
        eval->add_option("--data", data, "dataset JSONL")->required();
        config.apply(eval->add_option("--backend-url", backend_url,
                                      "model server URL or stub:")
                         ->required()
                         ->envname("CORPUSCLE_BACKEND_URL"),
                     "backend_url");
        config.apply(eval->add_option("--context-size", context_size, "model context size")
                         ->envname("CORPUSCLE_CONTEXT_SIZE"),
                     "context_size");
        eval->add_option("--report", report_path, "report JSON path")->required();
        eval->add_option("--max-items", max_items, "cap on dataset items (0 = all)");
        eval->add_flag("--no-answer-head", no_answer_head, "enable the no-answer comparison");
        eval->add_option("--stride", stride, "perplexity stride");
        eval->add_option("--source-label", source_label, "translation source language label");
        eval->add_option("--target-label", target_label, "translation target language label");
        eval->add_option("--summarization-suffix", sum_suffix, "summarization prompt suffix");
        add_common(eval, true);

        // tox
        auto* tox = app.add_subcommand("tox", "toxicity evaluation");
        std::string mode, tox_out, prompts_path;
        int64_t tox_n = 10000, iterations = 1000, completions = 50;
        tox->add_option("--mode", mode, "unprompted|prompted")->required();
        config.apply(tox->add_option("--backend-url", backend_url, "model server URL or stub:")
                         ->required()
                         ->envname("CORPUSCLE_BACKEND_URL"),
                     "backend_url");
        config.apply(tox->add_option("--scorer-url", scorer_url, "scorer URL or stub:")
                         ->required()
                         ->envname("CORPUSCLE_SCORER_URL"),
                     "scorer_url");
        tox->add_option("--n", tox_n, "unprompted generation count");
        tox->add_option("--iterations", iterations, "bootstrap iterations");
        tox->add_option("--completions-per-prompt", completions, "prompted completions");
        tox->add_option("--prompts", prompts_path, "prompts JSONL (prompted mode)");
        tox->add_option("--out", tox_out, "output directory")->required();
        config.apply(tox->add_option("--context-size", context_size, "model context size")
                         ->envname("CORPUSCLE_CONTEXT_SIZE"),
                     "context_size");
        tox->add_option("--stub-lexicon", stub_lexicon, "comma-separated stub lexicon");
        add_common(tox, true);

        // report
        auto* report = app.add_subcommand("report", "merge task reports");
        std::vector<std::string> report_inputs;
        std::string report_prefix = "summary";
        report->add_option("--inputs", report_inputs, "task report JSON files")->required();
        report->add_option("--out", report_prefix, "output prefix");
        add_common(report, false);

        config.reject_unknown();
        app.parse(argc, argv);

        if (ingest->parsed()) return cmd_ingest(in_glob, out_dir);
        if (score->parsed())
            return cmd_score(score_in, scorer_url, batch_size, score_out, chunk_policy,
                             split_csv(stub_lexicon));
        if (filter->parsed()) {
            const auto rep = corpuscle::filtering::run_filter(f_scores, f_corpus, policy,
                                                              f_out, jobs);
            write_file(f_report, rep.to_json() + "\n");
            std::cerr << "filter: kept " << rep.kept << "/" << rep.total_docs << "\n";
            return 0;
        }
        if (pack->parsed())
            return cmd_pack(p_corpus, vocab, merges, sample_len, p_out, separator_eot);
        if (eval->parsed())
            return cmd_eval(task, data, backend_url, context_size, seed, report_path, vocab,
                            merges, max_items, no_answer_head, stride, source_label,
                            target_label, sum_suffix);
        if (tox->parsed())
            return cmd_tox(mode, backend_url, scorer_url, tox_n, seed, tox_out, prompts_path,
                           vocab, merges, iterations, context_size, completions,
                           split_csv(stub_lexicon));
        if (report->parsed()) return cmd_report(report_inputs, report_prefix);
        return 1;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;  // user error regardless of CLI11's own code
    } catch (const CLI::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "pipeline error: " << e.what() << "\n";
        return 2;
    }
}
