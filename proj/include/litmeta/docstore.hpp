#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>
#include <zlib.h>

#include "litmeta/common.hpp"

namespace litmeta::doc {

enum class TextSource { PdfExtracted, PlainTextSidecar };

inline std::string to_string(TextSource s) {
    return s == TextSource::PdfExtracted ? "PdfExtracted" : "PlainTextSidecar";
}

// Extracted full text of one document. full_text is whitespace-normalized
// (runs collapsed to single spaces) so hashes are stable across extraction
// backends and sidecar encodings.
struct DocText {
    std::string record_id;
    std::string full_text;
    size_t char_count = 0;
    TextSource source = TextSource::PdfExtracted;
    uint64_t content_hash = 0;

    static DocText make(std::string record_id, std::string text, TextSource source) {
        DocText d;
        d.record_id = std::move(record_id);
        d.full_text = collapse_whitespace(text);
        d.char_count = d.full_text.size();
        d.source = source;
        d.content_hash = fnv1a64(d.full_text);
        return d;
    }
};

struct ContextWindow {
    std::string record_id;
    std::vector<std::string> segments;  // document order
    size_t approx_tokens = 0;
    bool truncated = false;

    std::string joined() const {
        std::string out;
        for (size_t i = 0; i < segments.size(); ++i) {
            if (i) out.push_back('\n');
            out += segments[i];
        }
        return out;
    }
};

namespace pdf {

inline std::string inflate_stream(std::string_view data) {
    z_stream zs{};
    if (inflateInit(&zs) != Z_OK) throw Error("UnreadablePdf", "zlib init failed");
    std::string out;
    char buf[16384];
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
    zs.avail_in = static_cast<uInt>(data.size());
    int ret = Z_OK;
    do {
        zs.next_out = reinterpret_cast<Bytef*>(buf);
        zs.avail_out = sizeof(buf);
        ret = ::inflate(&zs, Z_NO_FLUSH);
        if (ret != Z_OK && ret != Z_STREAM_END) {
            inflateEnd(&zs);
            throw Error("UnreadablePdf", "corrupt FlateDecode stream");
        }
        out.append(buf, sizeof(buf) - zs.avail_out);
    } while (ret != Z_STREAM_END && zs.avail_in > 0);
    inflateEnd(&zs);
    return out;
}

// Decode a PDF literal string body (the part between parentheses).
inline void decode_literal(std::string_view body, std::string& out) {
    for (size_t i = 0; i < body.size(); ++i) {
        char c = body[i];
        if (c != '\\') {
            out.push_back(c);
            continue;
        }
        if (++i >= body.size()) break;
        char e = body[i];
        switch (e) {
            case 'n': out.push_back('\n'); break;
            case 'r': out.push_back('\r'); break;
            case 't': out.push_back('\t'); break;
            case 'b': out.push_back('\b'); break;
            case 'f': out.push_back('\f'); break;
            case '(': out.push_back('('); break;
            case ')': out.push_back(')'); break;
            case '\\': out.push_back('\\'); break;
            case '\n': break;  // line continuation
            default:
                if (e >= '0' && e <= '7') {
                    int val = 0, digits = 0;
                    while (i < body.size() && body[i] >= '0' && body[i] <= '7' && digits < 3) {
                        val = val * 8 + (body[i] - '0');
                        ++i;
                        ++digits;
                    }
                    --i;
                    out.push_back(static_cast<char>(val));
                } else {
                    out.push_back(e);
                }
        }
    }
}

// Pull the text arguments of Tj / ' / TJ operators out of one content
// stream. Kerning numbers inside TJ arrays are ignored; pieces split only
// by kerning are joined without a space.
inline std::string extract_text_ops(std::string_view content) {
    std::string out;
    size_t i = 0;
    size_t last_close = 0;
    auto append_piece = [&](std::string_view body, size_t open_pos) {
        std::string piece;
        decode_literal(body, piece);
        if (piece.empty()) return;
        bool new_run = false;
        for (size_t g = last_close; g < open_pos && g < content.size(); ++g) {
            if (std::isalpha(static_cast<unsigned char>(content[g]))) {
                new_run = true;
                break;
            }
        }
        if (!out.empty() && new_run) out.push_back(' ');
        out += piece;
    };
    while (i < content.size()) {
        char c = content[i];
        if (c == '(') {
            // literal string; find the unescaped closing paren
            size_t j = i + 1;
            int depth = 1;
            while (j < content.size() && depth > 0) {
                if (content[j] == '\\') j += 2;
                else {
                    if (content[j] == '(') ++depth;
                    else if (content[j] == ')') --depth;
                    ++j;
                }
            }
            std::string_view body = content.substr(i + 1, j - i - 2 < content.size() ? j - i - 2 : 0);
            // only keep strings consumed by a text-showing operator
            size_t k = j;
            while (k < content.size() && is_ascii_space(content[k])) ++k;
            bool shows_text = false;
            if (k < content.size()) {
                if (content.compare(k, 2, "Tj") == 0 || content[k] == '\'' || content[k] == '"') {
                    shows_text = true;
                } else {
                    // part of a TJ array: look ahead past numbers/strings for "] TJ"
                    size_t m = k;
                    while (m < content.size() && content[m] != ']' && content[m] != '(' &&
                           content[m] != 'B' && m - k < 64) {
                        ++m;
                    }
                    if (m < content.size() && (content[m] == ']' || content[m] == '(')) {
                        if (content[m] == '(') shows_text = true;
                        else {
                            size_t t = m + 1;
                            while (t < content.size() && is_ascii_space(content[t])) ++t;
                            shows_text = content.compare(t, 2, "TJ") == 0;
                        }
                    }
                }
            }
            if (shows_text) {
                append_piece(body, i);
                last_close = j;
            }
            i = j;
        } else {
            ++i;
        }
    }
    return out;
}

}  // namespace pdf

// Text extraction is pluggable so a heavier PDF backend can be swapped in
// without touching callers.
class TextExtractor {
public:
    virtual ~TextExtractor() = default;
    virtual std::string extract(std::string_view pdf_bytes) const = 0;
};

// Minimal built-in extractor: walks content streams (raw or FlateDecode)
// in file order and collects Tj/TJ string operands. Covers generated and
// simple single-font PDFs; scanned-image PDFs yield EmptyText.
class BuiltinPdfExtractor : public TextExtractor {
public:
    std::string extract(std::string_view pdf_bytes) const override {
        if (pdf_bytes.size() < 5 || pdf_bytes.substr(0, 5) != "%PDF-") {
            throw Error("UnreadablePdf", "missing %PDF header");
        }
        if (pdf_bytes.find("/Encrypt") != std::string_view::npos) {
            throw Error("UnreadablePdf", "encrypted PDF");
        }
        std::string text;
        size_t pos = 0;
        while ((pos = pdf_bytes.find("stream", pos)) != std::string_view::npos) {
            // Require it to be the keyword, not "endstream".
            if (pos >= 3 && pdf_bytes.compare(pos - 3, 9, "endstream") == 0) {
                pos += 6;
                continue;
            }
            size_t dict_start = pdf_bytes.rfind("<<", pos);
            std::string_view dict =
                dict_start == std::string_view::npos
                    ? std::string_view{}
                    : pdf_bytes.substr(dict_start, pos - dict_start);
            size_t data_start = pos + 6;
            if (data_start < pdf_bytes.size() && pdf_bytes[data_start] == '\r') ++data_start;
            if (data_start < pdf_bytes.size() && pdf_bytes[data_start] == '\n') ++data_start;
            size_t data_end = pdf_bytes.find("endstream", data_start);
            if (data_end == std::string_view::npos) break;
            std::string_view raw = pdf_bytes.substr(data_start, data_end - data_start);
            std::string decoded;
            try {
                if (dict.find("/FlateDecode") != std::string_view::npos) {
                    decoded = pdf::inflate_stream(raw);
                } else if (dict.find("/Filter") != std::string_view::npos) {
                    decoded.clear();  // unsupported filter: skip stream
                } else {
                    decoded.assign(raw);
                }
            } catch (const Error&) {
                decoded.clear();
            }
            std::string piece = pdf::extract_text_ops(decoded);
            if (!piece.empty()) {
                if (!text.empty()) text.push_back(' ');
                text += piece;
            }
            pos = data_end + 9;
        }
        return text;
    }
};

// extract_text: PDF bytes -> whitespace-normalized DocText.
inline DocText extract_text(std::string_view pdf_bytes, const TextExtractor& extractor,
                            const std::string& record_id = {}) {
    std::string raw = extractor.extract(pdf_bytes);
    DocText d = DocText::make(record_id, std::move(raw), TextSource::PdfExtracted);
    if (d.char_count == 0) {
        throw Error("EmptyText", "no extractable characters (scanned-image PDF?)");
    }
    return d;
}

inline DocText extract_text(std::string_view pdf_bytes, const std::string& record_id = {}) {
    return extract_text(pdf_bytes, BuiltinPdfExtractor{}, record_id);
}

inline constexpr size_t kCharsPerToken = 4;

// build_context: estimate tokens at 4 chars/token. Over budget, keep a head
// and a tail segment; tables and metrics cluster at document ends.
inline ContextWindow build_context(const DocText& doc, size_t budget_tokens) {
    if (budget_tokens == 0) throw Error("BadBudget", "budget must be positive");
    ContextWindow w;
    w.record_id = doc.record_id;
    if (doc.char_count == 0) return w;

    size_t estimate = (doc.char_count + kCharsPerToken - 1) / kCharsPerToken;
    if (estimate <= budget_tokens) {
        w.segments.push_back(doc.full_text);
        w.approx_tokens = estimate;
        return w;
    }

    size_t char_budget = budget_tokens * kCharsPerToken;
    size_t head_chars = char_budget / 2;
    size_t tail_chars = char_budget - head_chars;
    w.segments.push_back(doc.full_text.substr(0, head_chars));
    w.segments.push_back(doc.full_text.substr(doc.char_count - tail_chars));
    w.approx_tokens = (head_chars + tail_chars + kCharsPerToken - 1) / kCharsPerToken;
    w.truncated = true;
    return w;
}

// Directory-backed document store. Layout: <corpus_dir>/<record_id>.pdf with
// an optional <record_id>.txt sidecar taking precedence. Extracted text is
// cached as <cache_dir>/<content_hash>.txt.
class DocStore {
public:
    DocStore(std::filesystem::path corpus_dir, std::filesystem::path cache_dir,
             std::shared_ptr<const TextExtractor> extractor =
                 std::make_shared<BuiltinPdfExtractor>())
        : corpus_dir_(std::move(corpus_dir)),
          cache_dir_(std::move(cache_dir)),
          extractor_(std::move(extractor)) {}

    bool has_document(const std::string& record_id) const {
        return std::filesystem::exists(sidecar_path(record_id)) ||
               std::filesystem::exists(pdf_path(record_id));
    }

    // Loads a document's text, preferring the sidecar, falling back to PDF
    // extraction. Throws UnreadablePdf / EmptyText / MissingDocument.
    DocText load(const std::string& record_id) const {
        if (auto sidecar = read_file_if_exists(sidecar_path(record_id))) {
            return DocText::make(record_id, *sidecar, TextSource::PlainTextSidecar);
        }
        auto pdf = read_file_if_exists(pdf_path(record_id));
        if (!pdf) throw Error("MissingDocument", "no .pdf or .txt for " + record_id);
        DocText d = extract_text(*pdf, *extractor_, record_id);
        cache_text(d);
        return d;
    }

    std::filesystem::path pdf_path(const std::string& record_id) const {
        return corpus_dir_ / (record_id + ".pdf");
    }
    std::filesystem::path sidecar_path(const std::string& record_id) const {
        return corpus_dir_ / (record_id + ".txt");
    }

private:
    void cache_text(const DocText& d) const {
        if (cache_dir_.empty()) return;
        std::lock_guard<std::mutex> lock(cache_mutex_);
        std::filesystem::create_directories(cache_dir_);
        auto path = cache_dir_ / (std::to_string(d.content_hash) + ".txt");
        if (!std::filesystem::exists(path)) atomic_write_file(path, d.full_text);
    }

    std::filesystem::path corpus_dir_;
    std::filesystem::path cache_dir_;
    std::shared_ptr<const TextExtractor> extractor_;
    mutable std::mutex cache_mutex_;
};

}  // namespace litmeta::doc
