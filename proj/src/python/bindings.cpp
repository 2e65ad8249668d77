#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "corpuscle/backends.hpp"
#include "corpuscle/bpe.hpp"
#include "corpuscle/corpus.hpp"
#include "corpuscle/filtering.hpp"
#include "corpuscle/metrics.hpp"
#include "corpuscle/packing.hpp"
#include "corpuscle/scoring.hpp"
#include "corpuscle/tasks.hpp"
#include "corpuscle/toxicity.hpp"

namespace py = pybind11;
using namespace corpuscle;

PYBIND11_MODULE(_corpuscle, m) {
    m.doc() = "corpus curation and zero-shot evaluation toolkit";

    // corpus
    py::class_<corpus::Document>(m, "Document")
        .def(py::init<>())
        .def_readwrite("id", &corpus::Document::id)
        .def_readwrite("shard", &corpus::Document::shard)
        .def_readwrite("text", &corpus::Document::text)
        .def_readwrite("url", &corpus::Document::url)
        .def_readwrite("char_count", &corpus::Document::char_count);
    py::class_<corpus::Chunk>(m, "Chunk")
        .def_readonly("doc_id", &corpus::Chunk::doc_id)
        .def_readonly("index", &corpus::Chunk::index)
        .def_readonly("char_start", &corpus::Chunk::char_start)
        .def_readonly("char_end", &corpus::Chunk::char_end)
        .def_readonly("text", &corpus::Chunk::text)
        .def_readonly("scorable", &corpus::Chunk::scorable);
    py::class_<corpus::ChunkPolicy>(m, "ChunkPolicy")
        .def(py::init<>())
        .def_readwrite("max_chars", &corpus::ChunkPolicy::max_chars)
        .def_readwrite("min_scorable_chars", &corpus::ChunkPolicy::min_scorable_chars);
    m.def("normalize_text", &corpus::normalize_text, py::arg("text"));
    m.def(
        "chunk_document",
        [](const std::string& id, const std::string& text, const corpus::ChunkPolicy& policy) {
            corpus::Document d;
            d.id = id;
            d.text = text;
            return corpus::chunk_document(d, policy);
        },
        py::arg("doc_id"), py::arg("text"), py::arg("policy") = corpus::ChunkPolicy{});
    m.def("load_documents",
          [](const std::filesystem::path& path, int64_t shard) {
              return corpus::load_documents(path, shard);
          },
          py::arg("path"), py::arg("shard") = 0);

    // filtering
    m.def("shard_loss_cutoff",
          [](const std::vector<double>& losses, double q) {
              return filtering::shard_loss_cutoff(losses, q);
          },
          py::arg("losses"), py::arg("q"));

    // tokenizer
    py::class_<bpe::BpeVocab>(m, "BpeVocab")
        .def_static("load", &bpe::BpeVocab::load, py::arg("vocab_json"),
                    py::arg("merges_txt"))
        .def_property_readonly("size", &bpe::BpeVocab::size)
        .def_property_readonly("end_of_text_id", &bpe::BpeVocab::end_of_text_id);
    m.def("bpe_encode",
          [](const std::string& text, const bpe::BpeVocab& v) { return bpe::encode(text, v); },
          py::arg("text"), py::arg("vocab"));
    m.def("bpe_decode", &bpe::decode, py::arg("ids"), py::arg("vocab"));
    m.def("pretokenize",
          [](const std::string& text) { return bpe::pretokenize(text); }, py::arg("text"));

    // metrics
    py::class_<metrics::PrfScore>(m, "PrfScore")
        .def_readonly("precision", &metrics::PrfScore::precision)
        .def_readonly("recall", &metrics::PrfScore::recall)
        .def_readonly("f1", &metrics::PrfScore::f1);
    py::class_<metrics::RougeTriple>(m, "RougeTriple")
        .def_readonly("r1", &metrics::RougeTriple::r1)
        .def_readonly("r2", &metrics::RougeTriple::r2)
        .def_readonly("rl", &metrics::RougeTriple::rl);
    py::class_<metrics::BleuScore>(m, "BleuScore")
        .def_readonly("bleu", &metrics::BleuScore::bleu)
        .def_readonly("brevity_penalty", &metrics::BleuScore::brevity_penalty)
        .def_readonly("candidate_len", &metrics::BleuScore::candidate_len)
        .def_readonly("reference_len", &metrics::BleuScore::reference_len);
    m.def("rouge_scores", &metrics::rouge_scores, py::arg("candidate"), py::arg("reference"));
    m.def("corpus_bleu",
          [](const std::vector<std::string>& c, const std::vector<std::string>& r) {
              return metrics::corpus_bleu(c, r);
          },
          py::arg("candidates"), py::arg("references"));
    m.def("squad_em_f1",
          [](const std::string& pred, const std::vector<std::string>& golds, bool no_answer) {
              const auto s = metrics::squad_em_f1(pred, golds, no_answer);
              return py::make_tuple(s.em, s.f1);
          },
          py::arg("prediction"), py::arg("gold_answers"), py::arg("no_answer") = false);
    m.def("clip_sentences", &metrics::clip_sentences, py::arg("text"),
          py::arg("max_sentences"));
    m.def("perplexities",
          [](double nll, int64_t tokens, int64_t chars) {
              const auto p = metrics::perplexities(nll, tokens, chars);
              return py::make_tuple(p.token_ppl, p.char_ppl);
          },
          py::arg("total_nll"), py::arg("token_count"), py::arg("char_count"));

    // prompts
    m.def("build_summarization_prompt", &tasks::build_summarization_prompt,
          py::arg("article"), py::arg("suffix") = "Pour résumer :");
    m.def("build_qa_prompt", &tasks::build_qa_prompt, py::arg("title"), py::arg("context"),
          py::arg("question"));
    m.def("build_translation_prompt", &tasks::build_translation_prompt,
          py::arg("source_lang_label"), py::arg("target_lang_label"), py::arg("text"));

    // toxicity statistics
    py::class_<toxicity::BootstrapEstimate>(m, "BootstrapEstimate")
        .def_readonly("n", &toxicity::BootstrapEstimate::n)
        .def_readonly("mean", &toxicity::BootstrapEstimate::mean)
        .def_readonly("std", &toxicity::BootstrapEstimate::std)
        .def_readonly("iterations", &toxicity::BootstrapEstimate::iterations);
    m.def("expected_max_toxicity",
          [](const std::vector<double>& scores, int64_t n, int64_t iterations, uint64_t seed) {
              return toxicity::expected_max_toxicity({"pool", scores}, n, iterations, seed);
          },
          py::arg("scores"), py::arg("n"), py::arg("iterations") = 1000, py::arg("seed") = 42);
    m.def("toxic_probability",
          [](const std::vector<double>& scores, int64_t n, double threshold,
             int64_t iterations, uint64_t seed) {
              return toxicity::toxic_probability({"pool", scores}, n, threshold, iterations,
                                                 seed);
          },
          py::arg("scores"), py::arg("n"), py::arg("threshold") = 0.5,
          py::arg("iterations") = 1000, py::arg("seed") = 42);
}
