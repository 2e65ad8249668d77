#include "corpuscle/tasks.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "corpuscle/metrics.hpp"
#include "corpuscle/utf8.hpp"

namespace corpuscle::tasks {

namespace {

uint64_t fnv1a(std::string_view s) {
    uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::vector<nlohmann::json> load_jsonl(const std::filesystem::path& path, int64_t max_items) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset: " + path.string());
    std::vector<nlohmann::json> items;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        items.push_back(nlohmann::json::parse(line));
        if (max_items > 0 && static_cast<int64_t>(items.size()) >= max_items) break;
    }
    return items;
}

}  // namespace

std::string prompt_hash(const std::string& prompt) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(prompt)));
    return buf;
}

std::string build_summarization_prompt(const std::string& article, const std::string& suffix) {
    return article + "\n" + suffix;
}

std::string build_qa_prompt(const std::string& title, const std::string& context,
                            const std::string& question) {
    return "Titre: " + title + "\nContexte: " + context + "\n\nQuestion: " + question +
           "\n\nRéponse:";
}

std::string build_translation_prompt(const std::string& source_lang_label,
                                     const std::string& target_lang_label,
                                     const std::string& text) {
    if (source_lang_label.empty() || target_lang_label.empty())
        throw std::invalid_argument("translation prompt needs non-empty language labels");
    return source_lang_label + " phrase: " + text + "\n" + target_lang_label + " phrase:";
}

std::string truncate_left(const std::string& prompt, int reserved_tokens, int context_size,
                          const bpe::BpeVocab& vocab, const std::string& suffix) {
    if (reserved_tokens >= context_size)
        throw std::invalid_argument("truncate_left: reserved_tokens >= context_size");
    const int64_t budget = context_size - reserved_tokens;
    if (!suffix.empty() &&
        static_cast<int64_t>(bpe::encode(suffix, vocab).size()) > budget)
        throw std::runtime_error("truncate_left: fixed suffix alone exceeds the token budget");

    std::vector<int> ids = bpe::encode(prompt, vocab);
    if (static_cast<int64_t>(ids.size()) <= budget) return prompt;
    ids.erase(ids.begin(), ids.end() - static_cast<ptrdiff_t>(budget));
    return bpe::decode(ids, vocab);
}

TaskSpec TaskSpec::resolve(const std::string& name, const std::filesystem::path& dataset,
                           int context_size, uint64_t seed) {
    TaskSpec s;
    s.name = name;
    s.dataset_path = dataset;
    s.context_size = context_size;
    s.gen_params.seed = seed;
    if (name == "orangesum") {
        s.gen_params.max_tokens = 100;
        s.gen_params.temperature = 1.0;
        s.gen_params.top_k = 2;
    } else if (name == "fquad") {
        s.gen_params.max_tokens = 100;
        s.gen_params.temperature = 0.0;  // greedy
    } else if (name == "wmt14_en_fr" || name == "wmt14_fr_en") {
        s.gen_params.max_tokens = 256;
        s.gen_params.temperature = 0.0;
        s.source_label = name == "wmt14_en_fr" ? "English" : "French";
        s.target_label = name == "wmt14_en_fr" ? "French" : "English";
    } else if (name == "wikitext_ppl") {
        // no generation; stride protocol only
    } else {
        throw std::invalid_argument("unknown task: " + name);
    }
    return s;
}

namespace {

nlohmann::json echo_config(const TaskSpec& spec) {
    nlohmann::json c;
    c["task"] = spec.name;
    c["dataset"] = spec.dataset_path.string();
    c["context_size"] = spec.context_size;
    c["stride"] = spec.stride;
    c["no_answer_head"] = spec.no_answer_head;
    c["max_tokens"] = spec.gen_params.max_tokens;
    c["temperature"] = spec.gen_params.temperature;
    if (spec.gen_params.top_k) c["top_k"] = *spec.gen_params.top_k;
    if (spec.gen_params.top_p) c["top_p"] = *spec.gen_params.top_p;
    c["seed"] = spec.gen_params.seed;
    if (!spec.source_label.empty()) c["source_label"] = spec.source_label;
    if (!spec.target_label.empty()) c["target_label"] = spec.target_label;
    c["summarization_suffix"] = spec.summarization_suffix;
    return c;
}

backends::GenParams item_params(const TaskSpec& spec, int64_t index) {
    backends::GenParams p = spec.gen_params;
    p.seed = splitmix64(spec.gen_params.seed ^ static_cast<uint64_t>(index + 1));
    return p;
}

TaskReport run_wikitext(const TaskSpec& spec, backends::Backend& backend,
                        const bpe::BpeVocab& vocab) {
    TaskReport report;
    report.task = spec.name;
    report.config_echo = echo_config(spec);
    const auto items = load_jsonl(spec.dataset_path, spec.max_items);

    std::string text;
    for (const auto& item : items) {
        if (!text.empty()) text += "\n";
        text += item.at("text").get<std::string>();
    }
    report.n_items = static_cast<int64_t>(items.size());
    const std::vector<int> ids = bpe::encode(text, vocab);
    const auto nll = metrics::sliding_window_nll(ids, spec.context_size, spec.stride, backend);
    const auto ppl =
        metrics::perplexities(nll.total_nll, nll.scored_tokens,
                              static_cast<int64_t>(utf8::count_codepoints(text)));
    report.metrics["total_nll"] = ppl.total_nll;
    report.metrics["token_count"] = static_cast<double>(ppl.token_count);
    report.metrics["char_count"] = static_cast<double>(ppl.char_count);
    report.metrics["token_ppl"] = ppl.token_ppl;
    report.metrics["char_ppl"] = ppl.char_ppl;
    return report;
}

struct ItemOutcome {
    nlohmann::json record;
    bool failed = false;
};

TaskReport run_generation_task(const TaskSpec& spec, backends::Backend& backend,
                               const bpe::BpeVocab& vocab) {
    TaskReport report;
    report.task = spec.name;
    report.config_echo = echo_config(spec);
    const auto items = load_jsonl(spec.dataset_path, spec.max_items);
    report.n_items = static_cast<int64_t>(items.size());

    const bool is_sum = spec.name == "orangesum";
    const bool is_qa = spec.name == "fquad";
    const bool is_mt = spec.name == "wmt14_en_fr" || spec.name == "wmt14_fr_en";

    std::vector<std::string> mt_candidates, mt_references;
    double sum_r1p = 0, sum_r1r = 0, sum_r1f = 0;
    double sum_r2p = 0, sum_r2r = 0, sum_r2f = 0;
    double sum_rlp = 0, sum_rlr = 0, sum_rlf = 0;
    double sum_em = 0, sum_f1 = 0;
    int64_t scored = 0;

    for (int64_t i = 0; i < static_cast<int64_t>(items.size()); ++i) {
        const auto& item = items[static_cast<size_t>(i)];
        nlohmann::json rec;
        rec["id"] = item.contains("id") ? item["id"] : nlohmann::json(std::to_string(i));
        try {
            std::string prompt;
            std::string suffix;
            if (is_sum) {
                suffix = spec.summarization_suffix;
                prompt = build_summarization_prompt(item.at("article").get<std::string>(),
                                                    suffix);
            } else if (is_qa) {
                prompt = build_qa_prompt(item.at("title").get<std::string>(),
                                         item.at("context").get<std::string>(),
                                         item.at("question").get<std::string>());
                suffix = "\n\nRéponse:";
            } else {
                prompt = build_translation_prompt(spec.source_label, spec.target_label,
                                                  item.at("source").get<std::string>());
                suffix = "\n" + spec.target_label + " phrase:";
            }
            const auto params = item_params(spec, i);
            prompt = truncate_left(prompt, params.max_tokens, spec.context_size, vocab, suffix);
            rec["prompt_hash"] = prompt_hash(prompt);

            const auto gen = backend.generate(prompt, params);
            std::string output = metrics::clip_sentences(gen.text, is_sum ? 3 : 1);
            rec["output"] = output;

            nlohmann::json im;
            if (is_sum) {
                const auto r =
                    metrics::rouge_scores(output, item.at("title").get<std::string>());
                im["rouge1_p"] = r.r1.precision; im["rouge1_r"] = r.r1.recall;
                im["rouge1_f1"] = r.r1.f1;
                im["rouge2_p"] = r.r2.precision; im["rouge2_r"] = r.r2.recall;
                im["rouge2_f1"] = r.r2.f1;
                im["rougeL_p"] = r.rl.precision; im["rougeL_r"] = r.rl.recall;
                im["rougeL_f1"] = r.rl.f1;
                sum_r1p += r.r1.precision; sum_r1r += r.r1.recall; sum_r1f += r.r1.f1;
                sum_r2p += r.r2.precision; sum_r2r += r.r2.recall; sum_r2f += r.r2.f1;
                sum_rlp += r.rl.precision; sum_rlr += r.rl.recall; sum_rlf += r.rl.f1;
            } else if (is_qa) {
                bool no_answer = false;
                if (spec.no_answer_head) {
                    const auto ll_ans = backend.loglikelihood(prompt, output);
                    const auto ll_na = backend.loglikelihood(prompt, kNoAnswerContinuation);
                    no_answer = ll_na.sum_logprob > ll_ans.sum_logprob;
                    im["no_answer"] = no_answer;
                }
                std::vector<std::string> golds;
                for (const auto& a : item.at("answers")) golds.push_back(a.get<std::string>());
                const auto s = metrics::squad_em_f1(output, golds, no_answer);
                im["em"] = s.em;
                im["f1"] = s.f1;
                sum_em += s.em;
                sum_f1 += s.f1;
            } else if (is_mt) {
                mt_candidates.push_back(output);
                mt_references.push_back(item.at("target").get<std::string>());
            }
            rec["item_metrics"] = im;
            ++scored;
        } catch (const std::exception& e) {
            rec["error"] = e.what();
            ++report.failed_items;
        }
        report.per_item.push_back(std::move(rec));
    }

    if (scored > 0) {
        const auto n = static_cast<double>(scored);
        if (is_sum) {
            report.metrics["rouge1_p"] = sum_r1p / n; report.metrics["rouge1_r"] = sum_r1r / n;
            report.metrics["rouge1_f1"] = sum_r1f / n;
            report.metrics["rouge2_p"] = sum_r2p / n; report.metrics["rouge2_r"] = sum_r2r / n;
            report.metrics["rouge2_f1"] = sum_r2f / n;
            report.metrics["rougeL_p"] = sum_rlp / n; report.metrics["rougeL_r"] = sum_rlr / n;
            report.metrics["rougeL_f1"] = sum_rlf / n;
        } else if (is_qa) {
            report.metrics["em"] = sum_em / n;
            report.metrics["f1"] = sum_f1 / n;
        } else if (is_mt) {
            const auto bleu = metrics::corpus_bleu(mt_candidates, mt_references);
            report.metrics["bleu"] = bleu.bleu;
            report.metrics["brevity_penalty"] = bleu.brevity_penalty;
            report.metrics["candidate_len"] = static_cast<double>(bleu.candidate_len);
            report.metrics["reference_len"] = static_cast<double>(bleu.reference_len);
        }
    }
    return report;
}

}  // namespace

TaskReport run_task(const TaskSpec& spec, backends::Backend& backend,
                    const bpe::BpeVocab& vocab) {
    if (spec.name == "wikitext_ppl") return run_wikitext(spec, backend, vocab);
    return run_generation_task(spec, backend, vocab);
}

std::string TaskReport::to_json() const {
    nlohmann::json j;
    j["task"] = task;
    j["n_items"] = n_items;
    j["failed_items"] = failed_items;
    j["metrics"] = metrics;
    j["per_item"] = per_item;
    j["config_echo"] = config_echo;
    return j.dump(2);
}

}  // namespace corpuscle::tasks
