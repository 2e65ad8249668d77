#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "corpuscle/backends.hpp"
#include "corpuscle/bpe.hpp"

namespace corpuscle::tasks {

// {article text}\nPour résumer :   (suffix overridable)
std::string build_summarization_prompt(const std::string& article,
                                       const std::string& suffix = "Pour résumer :");

// Titre: {title}\nContexte: {context}\n\nQuestion: {question}\n\nRéponse:
std::string build_qa_prompt(const std::string& title, const std::string& context,
                            const std::string& question);

// The no-answer continuation, with its leading space.
inline const char* kNoAnswerContinuation = " Sans réponse.";

// {src} phrase: {text}\n{tgt} phrase:
std::string build_translation_prompt(const std::string& source_lang_label,
                                     const std::string& target_lang_label,
                                     const std::string& text);

// Left-side truncation to context_size - reserved_tokens tokens. The fixed
// suffix (when given) must fit the budget on its own.
std::string truncate_left(const std::string& prompt, int reserved_tokens, int context_size,
                          const bpe::BpeVocab& vocab, const std::string& suffix = "");

struct TaskSpec {
    std::string name;  // wikitext_ppl | orangesum | fquad | wmt14_en_fr | wmt14_fr_en
    std::filesystem::path dataset_path;
    backends::GenParams gen_params;  // defaulted per task by resolve()
    int context_size = 2048;
    int stride = 512;                // wikitext_ppl only
    bool no_answer_head = false;     // fquad only
    std::string summarization_suffix = "Pour résumer :";
    std::string source_label;        // translation; defaulted by direction
    std::string target_label;
    int64_t max_items = 0;           // 0 = all

    // Applies the standard evaluation defaults for gen_params by task name.
    static TaskSpec resolve(const std::string& name, const std::filesystem::path& dataset,
                            int context_size, uint64_t seed);
};

struct TaskReport {
    std::string task;
    int64_t n_items = 0;
    int64_t failed_items = 0;
    std::map<std::string, double> metrics;
    nlohmann::json per_item = nlohmann::json::array();
    nlohmann::json config_echo;

    std::string to_json() const;
};

TaskReport run_task(const TaskSpec& spec, backends::Backend& backend,
                    const bpe::BpeVocab& vocab);

std::string prompt_hash(const std::string& prompt);

}  // namespace corpuscle::tasks
