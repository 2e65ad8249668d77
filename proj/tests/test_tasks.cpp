#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <nlohmann/json.hpp>

#include "corpuscle/tasks.hpp"
#include "test_util.hpp"

using namespace corpuscle;

namespace {

const bpe::BpeVocab& fixture_vocab() {
    static bpe::BpeVocab v = bpe::BpeVocab::load(testutil::fixture_path("fixture_vocab.json"),
                                                 testutil::fixture_path("fixture_merges.txt"));
    return v;
}

std::filesystem::path write_jsonl(const std::filesystem::path& dir, const std::string& name,
                                  const std::vector<nlohmann::json>& items) {
    const auto path = dir / name;
    std::ofstream out(path);
    for (const auto& item : items) out << item.dump() << "\n";
    return path;
}

// Backend whose generate() always emits the same canned sentence; scoring
// methods are pass-throughs to a stub. Used to pin metric plumbing.
class CannedBackend : public backends::Backend {
  public:
    CannedBackend(std::string canned, const bpe::BpeVocab* vocab)
        : canned_(std::move(canned)), stub_(vocab) {}
    backends::GenerationResult generate(const std::string&,
                                        const backends::GenParams&) override {
        backends::GenerationResult r;
        r.text = canned_;
        return r;
    }
    backends::LoglikelihoodResult loglikelihood(const std::string& c,
                                                const std::string& k) override {
        return stub_.loglikelihood(c, k);
    }
    backends::LoglikelihoodResult loglikelihood_tokens(std::span<const int> c,
                                                       std::span<const int> k) override {
        return stub_.loglikelihood_tokens(c, k);
    }
    int context_size() const override { return stub_.context_size(); }

  private:
    std::string canned_;
    backends::StubBackend stub_;
};

}  // namespace

TEST_CASE("prompt templates are byte exact") {
    CHECK(tasks::build_summarization_prompt("Le texte de l'article.") ==
          "Le texte de l'article.\nPour résumer :");
    CHECK(tasks::build_qa_prompt("Paris", "Paris est la capitale.", "Quelle est la capitale ?") ==
          "Titre: Paris\nContexte: Paris est la capitale.\n\nQuestion: Quelle est la capitale "
          "?\n\nRéponse:");
    CHECK(std::string(tasks::kNoAnswerContinuation) == " Sans réponse.");
    CHECK(tasks::build_translation_prompt("English", "French", "The cat sleeps.") ==
          "English phrase: The cat sleeps.\nFrench phrase:");
    CHECK_THROWS_AS(tasks::build_translation_prompt("", "French", "x"), std::invalid_argument);
}

TEST_CASE("prompt_hash is stable and hex formatted") {
    const auto h = tasks::prompt_hash("bonjour");
    CHECK(h.size() == 16);
    CHECK(h == tasks::prompt_hash("bonjour"));
    CHECK(h != tasks::prompt_hash("bonjour "));
}

TEST_CASE("truncate_left keeps short prompts intact") {
    const std::string p = "une phrase courte";
    CHECK(tasks::truncate_left(p, 100, 2048, fixture_vocab()) == p);
}

TEST_CASE("truncate_left keeps the rightmost tokens") {
    std::string p;
    for (int i = 0; i < 300; ++i) p += "mot" + std::to_string(i % 10) + " ";
    p += "fin de texte";
    const auto out = tasks::truncate_left(p, 10, 50, fixture_vocab());
    const auto ids = bpe::encode(out, fixture_vocab());
    CHECK(ids.size() <= 40);
    CHECK(out.size() >= 12);
    CHECK(out.substr(out.size() - 12) == "fin de texte");
}

TEST_CASE("truncate_left validates the budget") {
    CHECK_THROWS_AS(tasks::truncate_left("x", 2048, 2048, fixture_vocab()),
                    std::invalid_argument);
    std::string long_suffix;
    for (int i = 0; i < 200; ++i) long_suffix += " suffixe";
    CHECK_THROWS(tasks::truncate_left("prompt" + long_suffix, 2040, 2048, fixture_vocab(),
                                      long_suffix));
}

TEST_CASE("resolve applies per-task defaults") {
    const auto sum = tasks::TaskSpec::resolve("orangesum", "d.jsonl", 2048, 1);
    CHECK(sum.gen_params.max_tokens == 100);
    REQUIRE(sum.gen_params.top_k.has_value());
    CHECK(*sum.gen_params.top_k == 2);
    CHECK(sum.gen_params.temperature == 1.0);

    const auto qa = tasks::TaskSpec::resolve("fquad", "d.jsonl", 2048, 1);
    CHECK(qa.gen_params.max_tokens == 100);
    CHECK(qa.gen_params.temperature == 0.0);

    const auto mt = tasks::TaskSpec::resolve("wmt14_en_fr", "d.jsonl", 2048, 1);
    CHECK(mt.gen_params.max_tokens == 256);
    CHECK(mt.source_label == "English");
    CHECK(mt.target_label == "French");
    const auto rev = tasks::TaskSpec::resolve("wmt14_fr_en", "d.jsonl", 2048, 1);
    CHECK(rev.source_label == "French");
    CHECK(rev.target_label == "English");

    CHECK_THROWS_AS(tasks::TaskSpec::resolve("nope", "d.jsonl", 2048, 1),
                    std::invalid_argument);
}

TEST_CASE("summarization task runs end to end against the stub") {
    const auto dir = testutil::temp_dir("orangesum");
    std::vector<nlohmann::json> items;
    for (int i = 0; i < 20; ++i) {
        nlohmann::json j;
        j["id"] = "doc-" + std::to_string(i);
        j["article"] = "Le conseil municipal a voté le budget numéro " + std::to_string(i) +
                       " pour la commune. Les travaux commencent bientôt.";
        j["title"] = "Vote du budget " + std::to_string(i);
        items.push_back(j);
    }
    const auto data = write_jsonl(dir, "orangesum.jsonl", items);

    auto spec = tasks::TaskSpec::resolve("orangesum", data, 2048, 99);
    spec.gen_params.max_tokens = 10;  // keep the smoke test fast
    backends::StubBackend backend(&fixture_vocab());
    const auto report = tasks::run_task(spec, backend, fixture_vocab());

    CHECK(report.task == "orangesum");
    CHECK(report.n_items == 20);
    CHECK(report.failed_items == 0);
    CHECK(report.per_item.size() == 20);
    CHECK(report.metrics.count("rouge1_f1") == 1);
    CHECK(report.metrics.count("rouge2_f1") == 1);
    CHECK(report.metrics.count("rougeL_f1") == 1);
    CHECK(report.metrics.at("rouge1_f1") >= 0.0);
    CHECK(report.metrics.at("rouge1_f1") <= 1.0);
    const auto& rec = report.per_item[0];
    CHECK(rec.at("id") == "doc-0");
    CHECK(rec.contains("prompt_hash"));
    CHECK(rec.contains("output"));
    CHECK(rec.at("item_metrics").contains("rouge1_f1"));
}

TEST_CASE("qa task with the no-answer head") {
    const auto dir = testutil::temp_dir("fquad");
    std::vector<nlohmann::json> items;
    for (int i = 0; i < 20; ++i) {
        nlohmann::json j;
        j["id"] = i;
        j["title"] = "Sujet " + std::to_string(i);
        j["context"] = "La ville de Nantes compte " + std::to_string(100000 + i) +
                       " habitants selon le recensement.";
        j["question"] = "Combien d'habitants compte la ville ?";
        j["answers"] = {std::to_string(100000 + i) + " habitants"};
        items.push_back(j);
    }
    const auto data = write_jsonl(dir, "fquad.jsonl", items);

    auto spec = tasks::TaskSpec::resolve("fquad", data, 2048, 7);
    spec.gen_params.max_tokens = 10;
    spec.no_answer_head = true;
    backends::StubBackend backend(&fixture_vocab());
    const auto report = tasks::run_task(spec, backend, fixture_vocab());

    CHECK(report.n_items == 20);
    CHECK(report.failed_items == 0);
    CHECK(report.metrics.count("em") == 1);
    CHECK(report.metrics.count("f1") == 1);
    CHECK(report.metrics.at("f1") >= report.metrics.at("em"));
    CHECK(report.per_item[0].at("item_metrics").contains("no_answer"));
}

TEST_CASE("translation task uses corpus bleu; unrelated output scores near zero") {
    const auto dir = testutil::temp_dir("wmt");
    std::vector<nlohmann::json> items;
    for (int i = 0; i < 20; ++i) {
        nlohmann::json j;
        j["source"] = "The committee approved resolution number " + std::to_string(i) +
                      " after a long debate.";
        j["target"] = "Le comité a approuvé la résolution numéro " + std::to_string(i) +
                      " après un long débat.";
        items.push_back(j);
    }
    const auto data = write_jsonl(dir, "wmt.jsonl", items);

    auto spec = tasks::TaskSpec::resolve("wmt14_en_fr", data, 2048, 3);
    spec.gen_params.max_tokens = 12;
    CannedBackend backend("Les oiseaux chantent dans un autre registre complet.",
                          &fixture_vocab());
    const auto report = tasks::run_task(spec, backend, fixture_vocab());

    CHECK(report.n_items == 20);
    CHECK(report.failed_items == 0);
    CHECK(report.metrics.count("bleu") == 1);
    CHECK(report.metrics.at("bleu") < 5.0);
}

TEST_CASE("translation with the references as output scores 100") {
    const auto dir = testutil::temp_dir("wmt-perfect");
    std::vector<nlohmann::json> items;
    nlohmann::json j;
    j["source"] = "The blue cat sleeps on the red mat today.";
    j["target"] = "Le chat bleu dort sur le tapis rouge aujourd'hui.";
    items.push_back(j);
    const auto data = write_jsonl(dir, "wmt.jsonl", items);

    auto spec = tasks::TaskSpec::resolve("wmt14_en_fr", data, 2048, 3);
    CannedBackend backend("Le chat bleu dort sur le tapis rouge aujourd'hui.", &fixture_vocab());
    const auto report = tasks::run_task(spec, backend, fixture_vocab());
    CHECK(report.metrics.at("bleu") == doctest::Approx(100.0));
}

TEST_CASE("wikitext perplexity task") {
    const auto dir = testutil::temp_dir("wikitext");
    std::vector<nlohmann::json> items;
    for (int i = 0; i < 10; ++i) {
        nlohmann::json j;
        j["text"] = "Ligne de texte encyclopédique numéro " + std::to_string(i) + ".";
        items.push_back(j);
    }
    const auto data = write_jsonl(dir, "wiki.jsonl", items);

    auto spec = tasks::TaskSpec::resolve("wikitext_ppl", data, 64, 1);
    spec.stride = 16;
    backends::StubBackend backend(&fixture_vocab());
    const auto report = tasks::run_task(spec, backend, fixture_vocab());

    CHECK(report.n_items == 10);
    CHECK(report.metrics.at("token_ppl") > 1.0);
    CHECK(report.metrics.at("char_ppl") > 1.0);
    // more chars than tokens, so char-level perplexity is lower
    CHECK(report.metrics.at("char_ppl") < report.metrics.at("token_ppl"));
    std::string joined;
    for (int i = 0; i < 10; ++i) {
        if (i > 0) joined += "\n";
        joined += items[static_cast<size_t>(i)].at("text").get<std::string>();
    }
    // every token except the first is scored exactly once
    CHECK(report.metrics.at("token_count") ==
          static_cast<double>(bpe::encode(joined, fixture_vocab()).size()) - 1.0);
}

TEST_CASE("greedy tasks are bit reproducible") {
    const auto dir = testutil::temp_dir("repro");
    std::vector<nlohmann::json> items;
    for (int i = 0; i < 5; ++i) {
        nlohmann::json j;
        j["title"] = "T" + std::to_string(i);
        j["context"] = "Un contexte factuel " + std::to_string(i) + ".";
        j["question"] = "Quoi ?";
        j["answers"] = {"rien"};
        items.push_back(j);
    }
    const auto data = write_jsonl(dir, "fquad.jsonl", items);

    auto spec = tasks::TaskSpec::resolve("fquad", data, 2048, 11);
    spec.gen_params.max_tokens = 8;
    backends::StubBackend b1(&fixture_vocab()), b2(&fixture_vocab());
    const auto r1 = tasks::run_task(spec, b1, fixture_vocab());
    const auto r2 = tasks::run_task(spec, b2, fixture_vocab());
    CHECK(r1.to_json() == r2.to_json());
}

TEST_CASE("per-item failures are recorded, not fatal") {
    const auto dir = testutil::temp_dir("failures");
    std::vector<nlohmann::json> items;
    nlohmann::json good;
    good["article"] = "Un article valide avec du contenu.";
    good["title"] = "Titre";
    items.push_back(good);
    nlohmann::json bad;
    bad["title"] = "Sans article";  // missing the "article" field
    items.push_back(bad);
    const auto data = write_jsonl(dir, "sum.jsonl", items);

    auto spec = tasks::TaskSpec::resolve("orangesum", data, 2048, 1);
    spec.gen_params.max_tokens = 5;
    backends::StubBackend backend(&fixture_vocab());
    const auto report = tasks::run_task(spec, backend, fixture_vocab());
    CHECK(report.n_items == 2);
    CHECK(report.failed_items == 1);
    CHECK(report.per_item[1].contains("error"));
}

TEST_CASE("max_items caps the dataset") {
    const auto dir = testutil::temp_dir("cap");
    std::vector<nlohmann::json> items;
    for (int i = 0; i < 30; ++i) {
        nlohmann::json j;
        j["article"] = "Texte " + std::to_string(i) + ".";
        j["title"] = "T";
        items.push_back(j);
    }
    const auto data = write_jsonl(dir, "sum.jsonl", items);
    auto spec = tasks::TaskSpec::resolve("orangesum", data, 2048, 1);
    spec.gen_params.max_tokens = 5;
    spec.max_items = 4;
    backends::StubBackend backend(&fixture_vocab());
    CHECK(tasks::run_task(spec, backend, fixture_vocab()).n_items == 4);
}
