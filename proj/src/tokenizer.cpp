#include "jolt/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "jolt/error.hpp"

namespace jolt {

namespace {

const std::string kSpecialText[] = {"<|pad|>", "<|bos|>", "<|eos|>", std::string(kMarkerText), "<|unk|>"};

bool word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || static_cast<unsigned char>(c) >= 0x80;
}

}  // namespace

std::vector<RawToken> split_words(std::string_view text) {
    std::vector<RawToken> out;
    std::size_t i = 0;
    auto emit = [&](std::size_t b, std::size_t e) { out.push_back({std::string(text.substr(b, e - b)), {b, e}}); };
    while (i < text.size()) {
        const char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        const std::size_t start = i;
        if (text.substr(i, kMarkerText.size()) == kMarkerText) {
            i += kMarkerText.size();
            emit(start, i);
            continue;
        }
        if (c == '\'') {
            std::size_t j = i + 1;
            bool closed = false;
            while (j < text.size()) {
                if (text[j] == '\n') break;
                if (text[j] == '\'') {
                    if (j + 1 < text.size() && text[j + 1] == '\'') {
                        j += 2;
                        continue;
                    }
                    closed = true;
                    ++j;
                    break;
                }
                ++j;
            }
            i = closed ? j : i + 1;
            emit(start, i);
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
            if (i + 1 < text.size() && text[i] == '.' && std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
                ++i;
                while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
            }
            // Digits glued to letters (e.g. "t1") stay one word.
            while (i < text.size() && word_char(text[i])) ++i;
            emit(start, i);
            continue;
        }
        if (word_char(c)) {
            while (i < text.size() && word_char(text[i])) ++i;
            emit(start, i);
            continue;
        }
        static constexpr std::string_view two[] = {"<=", ">=", "<>", "!=", "||"};
        bool matched = false;
        for (auto op : two) {
            if (text.substr(i, 2) == op) {
                i += 2;
                matched = true;
                break;
            }
        }
        if (!matched) ++i;
        emit(start, i);
    }
    return out;
}

Vocab::Vocab() {
    for (const auto& s : kSpecialText) add(s);
}

void Vocab::add(const std::string& token) {
    ids_.emplace(token, static_cast<TokenId>(tokens_.size()));
    tokens_.push_back(token);
}

Vocab Vocab::build(const std::vector<std::string>& texts) {
    std::map<std::string, std::size_t> freq;
    for (const auto& t : texts) {
        for (auto& w : split_words(t)) ++freq[w.text];
    }
    std::vector<std::pair<std::string, std::size_t>> items(freq.begin(), freq.end());
    std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    Vocab v;
    for (const auto& [tok, n] : items) {
        if (v.ids_.count(tok)) continue;
        v.add(tok);
    }
    return v;
}

TokenId Vocab::id(std::string_view token) const {
    const auto it = ids_.find(std::string(token));
    return it == ids_.end() ? kUnkId : it->second;
}

const std::string& Vocab::token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) return kSpecialText[kUnkId];
    return tokens_[static_cast<std::size_t>(id)];
}

nlohmann::json Vocab::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t i = 0; i < tokens_.size(); ++i) j[tokens_[i]] = i;
    return j;
}

Vocab Vocab::from_json(const nlohmann::json& j) {
    std::vector<std::string> by_id(j.size());
    for (const auto& [tok, id] : j.items()) {
        const auto i = id.get<std::size_t>();
        if (i >= by_id.size() || !by_id[i].empty()) throw Error(ErrorCode::FormatError, "vocab ids must be a dense bijection");
        by_id[i] = tok;
    }
    for (std::size_t i = 0; i < 5; ++i) {
        if (i >= by_id.size() || by_id[i] != kSpecialText[i]) throw Error(ErrorCode::FormatError, "vocab missing reserved ids");
    }
    Vocab v;
    for (std::size_t i = 5; i < by_id.size(); ++i) v.add(by_id[i]);
    return v;
}

std::size_t SegmentMap::column_count() const {
    std::size_t n = 0;
    for (const auto& t : tables) n += t.columns.size();
    return n;
}

std::vector<std::size_t> SegmentMap::marker_positions() const {
    std::vector<std::size_t> out;
    for (const auto& t : tables) {
        for (const auto& c : t.columns) out.push_back(c.marker);
    }
    return out;
}

Span SegmentMap::range(Segment s) const {
    std::size_t b = segment.size(), e = segment.size();
    for (std::size_t i = 0; i < segment.size(); ++i) {
        if (segment[i] != s) continue;
        if (b == segment.size()) b = i;
        e = i + 1;
    }
    return {b, e};
}

std::pair<std::size_t, std::size_t> SegmentMap::locate(std::size_t flat_column) const {
    std::size_t k = flat_column;
    for (std::size_t t = 0; t < tables.size(); ++t) {
        if (k < tables[t].columns.size()) return {t, k};
        k -= tables[t].columns.size();
    }
    throw Error(ErrorCode::UnknownColumn, "column index " + std::to_string(flat_column) + " out of range");
}

namespace {

void fill(std::vector<std::uint8_t>& v, const Span& s) {
    for (std::size_t i = s.begin; i < s.end; ++i) v[i] = 1;
}

void fill_envelope(std::vector<std::uint8_t>& v, const TableTokens& t) {
    fill(v, t.header);
    if (t.pk) fill(v, *t.pk);
    for (const auto& fk : t.fks) fill(v, fk);
    fill(v, t.footer);
}

}  // namespace

void SegmentMap::set_gt_columns(const std::vector<std::size_t>& flat_columns) {
    gt_schema.assign(size(), 0);
    for (auto c : flat_columns) {
        const auto [t, k] = locate(c);
        fill(gt_schema, tables[t].columns[k].definition);
        fill_envelope(gt_schema, tables[t]);
    }
}

void SegmentMap::set_noisy_columns(const std::vector<std::size_t>& flat_columns) {
    noisy_schema.assign(size(), 0);
    for (auto c : flat_columns) {
        const auto [t, k] = locate(c);
        fill(noisy_schema, tables[t].columns[k].definition);
        if (gt_schema.empty() || !gt_schema[tables[t].header.begin]) fill_envelope(noisy_schema, tables[t]);
    }
}

std::string joined_text(std::string_view prefix, std::string_view schema, std::string_view query) {
    std::string out(prefix);
    out += '\n';
    out += schema;
    out += '\n';
    out += query;
    return out;
}

namespace {

/// Maps a character span of a part to the token range covering it.
Span to_token_span(const Span& chars, const std::vector<RawToken>& toks, std::size_t token_base) {
    std::size_t first = toks.size(), last = 0;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        const Span& t = toks[i].chars;
        if (t.end <= chars.begin || t.begin >= chars.end) continue;
        if (t.begin < chars.begin || t.end > chars.end) {
            throw Error(ErrorCode::SpanMisaligned, "span [" + std::to_string(chars.begin) + "," + std::to_string(chars.end) +
                                                       ") splits token '" + toks[i].text + "'");
        }
        first = std::min(first, i);
        last = i + 1;
    }
    if (first == toks.size()) {
        throw Error(ErrorCode::SpanMisaligned,
                    "span [" + std::to_string(chars.begin) + "," + std::to_string(chars.end) + ") covers no token");
    }
    return {token_base + first, token_base + last};
}

}  // namespace

Encoding encode(std::string_view prefix, const SerializedSchema& schema, std::string_view query, const Vocab& vocab,
                std::size_t max_len) {
    Encoding enc;
    auto& ts = enc.tokens;
    auto& seg = enc.segments;
    auto push = [&](TokenId id, Span chars, Segment s) {
        ts.ids.push_back(id);
        ts.char_offsets.push_back(chars);
        ts.positions.push_back(static_cast<std::int32_t>(ts.positions.size()));
        seg.segment.push_back(s);
        seg.marker.push_back(s == Segment::Schema && id == kMarkerId ? 1 : 0);
    };

    push(kBosId, {0, 0}, Segment::Prefix);
    for (const auto& t : split_words(prefix)) push(vocab.id(t.text), t.chars, Segment::Prefix);

    const std::size_t schema_base = prefix.size() + 1;
    const auto schema_tokens = split_words(schema.text);
    const std::size_t schema_token_base = ts.size();
    for (const auto& t : schema_tokens) {
        push(t.text == kMarkerText ? kMarkerId : vocab.id(t.text), {schema_base + t.chars.begin, schema_base + t.chars.end},
             Segment::Schema);
    }

    const std::size_t query_base = schema_base + schema.text.size() + 1;
    const auto query_tokens = split_words(query);
    // BOS opens a non-empty query, so its first SQL token is predicted from a
    // query row (selective attention) rather than from a schema row.
    if (!query_tokens.empty()) push(kBosId, {query_base, query_base}, Segment::Query);
    for (const auto& t : query_tokens) push(vocab.id(t.text), {query_base + t.chars.begin, query_base + t.chars.end}, Segment::Query);
    if (!query_tokens.empty()) push(kEosId, {query_base + query.size(), query_base + query.size()}, Segment::Query);

    if (ts.size() > max_len) {
        throw Error(ErrorCode::SequenceTooLong, std::to_string(ts.size()) + " tokens exceed max length " + std::to_string(max_len));
    }

    std::size_t markers_seen = 0;
    for (const auto& t : schema.spans.tables) {
        TableTokens tt;
        tt.name = t.name;
        tt.header = to_token_span(t.header, schema_tokens, schema_token_base);
        if (t.pk) tt.pk = to_token_span(*t.pk, schema_tokens, schema_token_base);
        for (const auto& fk : t.fks) tt.fks.push_back(to_token_span(fk, schema_tokens, schema_token_base));
        tt.footer = to_token_span(t.footer, schema_tokens, schema_token_base);
        for (const auto& c : t.columns) {
            const Span marker = to_token_span(c.marker, schema_tokens, schema_token_base);
            if (marker.size() != 1 || ts.ids[marker.begin] != kMarkerId) {
                throw Error(ErrorCode::SpanMisaligned, "marker span of column " + c.name + " is not a single marker token");
            }
            ++markers_seen;
            tt.columns.push_back({c.name, to_token_span(c.definition, schema_tokens, schema_token_base), marker.begin});
        }
        seg.tables.push_back(std::move(tt));
    }
    const auto total_markers = static_cast<std::size_t>(std::count(seg.marker.begin(), seg.marker.end(), 1));
    if (total_markers != markers_seen) {
        throw Error(ErrorCode::SpanMisaligned, "schema text holds " + std::to_string(total_markers) + " markers but spans index " +
                                                   std::to_string(markers_seen));
    }
    ts.columns.assign(ts.size(), 0);
    std::int32_t flat = 0;
    for (const auto& t : seg.tables) {
        for (const auto& c : t.columns) {
            ++flat;
            for (std::size_t i = c.definition.begin; i < c.definition.end; ++i) ts.columns[i] = flat;
        }
    }
    seg.gt_schema.assign(ts.size(), 0);
    seg.noisy_schema.assign(ts.size(), 0);
    return enc;
}

std::string decode(const std::vector<TokenId>& ids, const Vocab& vocab) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ' ';
        out += vocab.token(ids[i]);
    }
    return out;
}

}  // namespace jolt
