#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <random>
#include <zlib.h>

#include "litmeta/docstore.hpp"

using namespace litmeta;
using namespace litmeta::doc;

namespace {

std::string deflate_bytes(const std::string& raw) {
    uLongf out_size = compressBound(static_cast<uLong>(raw.size()));
    std::string out(out_size, '\0');
    REQUIRE(compress2(reinterpret_cast<Bytef*>(out.data()), &out_size,
                      reinterpret_cast<const Bytef*>(raw.data()), static_cast<uLong>(raw.size()),
                      6) == Z_OK);
    out.resize(out_size);
    return out;
}

// Minimal generated PDF: one content stream per page, optionally deflated.
std::string make_pdf(const std::vector<std::string>& pages, bool flate) {
    std::string pdf = "%PDF-1.4\n";
    pdf += "1 0 obj << /Type /Catalog /Pages 2 0 R >> endobj\n";
    pdf += "2 0 obj << /Type /Pages /Count " + std::to_string(pages.size()) + " >> endobj\n";
    int obj = 3;
    for (const auto& text : pages) {
        std::string content = "BT /F1 12 Tf 72 720 Td (" + text + ") Tj ET";
        if (flate) content = deflate_bytes(content);
        pdf += std::to_string(obj) + " 0 obj << /Length " + std::to_string(content.size());
        if (flate) pdf += " /Filter /FlateDecode";
        pdf += " >>\nstream\n" + content + "\nendstream endobj\n";
        obj += 1;
    }
    pdf += "trailer << /Root 1 0 R >>\n%%EOF\n";
    return pdf;
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("litmeta-doc-" + std::to_string(std::random_device{}()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("extract_text concatenates page text in page order") {
    auto doc = extract_text(make_pdf({"alpha", "beta"}, false));
    CHECK(doc.full_text == "alpha beta");
    CHECK(doc.char_count == 10);
    CHECK(doc.source == TextSource::PdfExtracted);
}

TEST_CASE("extract_text inflates FlateDecode streams") {
    auto doc = extract_text(make_pdf({"alpha", "beta"}, true));
    CHECK(doc.full_text == "alpha beta");
}

TEST_CASE("extract_text joins TJ kerning pieces without spaces") {
    std::string content = "BT [(al)-250(pha)] TJ ET";
    std::string pdf = "%PDF-1.4\n1 0 obj << /Length " + std::to_string(content.size()) +
                      " >>\nstream\n" + content + "\nendstream endobj\n%%EOF\n";
    auto doc = extract_text(pdf);
    CHECK(doc.full_text == "alpha");
}

TEST_CASE("extract_text rejects corrupt byte streams") {
    CHECK_THROWS_MATCHES(extract_text("this is not a pdf"), Error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("UnreadablePdf")));
}

TEST_CASE("extract_text reports scanned PDFs as EmptyText") {
    std::string pdf = "%PDF-1.4\n1 0 obj << /Length 4 >>\nstream\nqQqQ\nendstream endobj\n%%EOF\n";
    CHECK_THROWS_MATCHES(extract_text(pdf), Error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("EmptyText")));
}

TEST_CASE("content hash is stable across extractions") {
    std::string pdf = make_pdf({"alpha", "beta"}, true);
    auto a = extract_text(pdf);
    auto b = extract_text(pdf);
    CHECK(a.content_hash == b.content_hash);
    CHECK(a.content_hash == fnv1a64("alpha beta"));
}

TEST_CASE("build_context keeps small documents whole") {
    auto doc = DocText::make("r1", std::string(100, 'x'), TextSource::PlainTextSidecar);
    auto window = build_context(doc, 1000);
    REQUIRE(window.segments.size() == 1);
    CHECK(window.approx_tokens == 25);
    CHECK_FALSE(window.truncated);
}

TEST_CASE("build_context keeps a head and tail segment when over budget") {
    std::string text;
    for (int i = 0; i < 4000; ++i) text += "abcdefghij";  // 40000 chars
    auto doc = DocText::make("r1", text, TextSource::PlainTextSidecar);
    auto window = build_context(doc, 4000);
    REQUIRE(window.segments.size() == 2);
    CHECK(window.truncated);
    CHECK(window.approx_tokens <= 4000);
    CHECK(window.segments[0] == doc.full_text.substr(0, window.segments[0].size()));
    CHECK(window.segments[1] ==
          doc.full_text.substr(doc.full_text.size() - window.segments[1].size()));
}

TEST_CASE("build_context of an empty document is empty") {
    auto doc = DocText::make("r1", "", TextSource::PlainTextSidecar);
    auto window = build_context(doc, 100);
    CHECK(window.segments.empty());
    CHECK(window.approx_tokens == 0);
    CHECK_FALSE(window.truncated);
}

TEST_CASE("budget respected and truncation monotone") {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        size_t chars = rng() % 5000;
        auto doc = DocText::make("r", std::string(chars, 'a'), TextSource::PlainTextSidecar);
        size_t small_budget = 1 + rng() % 600;
        size_t big_budget = small_budget + rng() % 600;
        auto small = build_context(doc, small_budget);
        auto big = build_context(doc, big_budget);
        CHECK(small.approx_tokens <= small_budget);
        CHECK(big.approx_tokens <= big_budget);
        if (!small.truncated) CHECK_FALSE(big.truncated);
    }
}

TEST_CASE("docstore prefers sidecars and caches extracted text") {
    TempDir dir;
    std::filesystem::create_directories(dir.path / "docs");
    atomic_write_file(dir.path / "docs" / "r1.txt", "hello");
    atomic_write_file(dir.path / "docs" / "r2.pdf", make_pdf({"gamma"}, true));
    // r1 also has a (different) pdf: the sidecar must win
    atomic_write_file(dir.path / "docs" / "r1.pdf", make_pdf({"ignored"}, false));

    DocStore store(dir.path / "docs", dir.path / "cache");
    auto r1 = store.load("r1");
    CHECK(r1.source == TextSource::PlainTextSidecar);
    CHECK(r1.full_text == "hello");
    CHECK(r1.char_count == 5);

    auto r2 = store.load("r2");
    CHECK(r2.source == TextSource::PdfExtracted);
    CHECK(r2.full_text == "gamma");
    CHECK(std::filesystem::exists(dir.path / "cache" /
                                  (std::to_string(r2.content_hash) + ".txt")));

    CHECK_FALSE(store.has_document("r3"));
    CHECK_THROWS_AS(store.load("r3"), Error);
}

TEST_CASE("sidecar text is whitespace normalized") {
    TempDir dir;
    std::filesystem::create_directories(dir.path / "docs");
    atomic_write_file(dir.path / "docs" / "r1.txt", "  hello\n\nworld \t twice \n");
    DocStore store(dir.path / "docs", "");
    CHECK(store.load("r1").full_text == "hello world twice");
}
