#include "regionlens/tokenproto.hpp"

#include <algorithm>
#include <set>

namespace regionlens {

namespace {

constexpr std::string_view kGroundOpen = "<ground>";
constexpr std::string_view kGroundClose = "</ground>";
constexpr std::string_view kObjectOpen = "<object>";
constexpr std::string_view kObjectClose = "</object>";
constexpr std::string_view kRegionPrefix = "<region";
constexpr std::size_t kMaxIndexDigits = 9;

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

bool is_text_byte(char c) { return c != '<' && c != '>'; }

}  // namespace

std::string region_tag(int index) { return "<region" + std::to_string(index) + ">"; }

void RegionTokenSequence::validate() const {
    std::size_t i = 0;
    auto fail = [&](const std::string& what) {
        throw ProtocolError("RegionTokenSequence: " + what + " at element " + std::to_string(i));
    };
    if (region_count < 0) fail("negative region count");
    if (elements.size() < 3) fail("sequence too short");
    if (!std::holds_alternative<ImageTokenBlock>(elements[i++])) fail("expected image block");
    if (!std::holds_alternative<Newline>(elements[i++])) fail("expected newline after image block");
    for (int k = 0; k < region_count; ++k) {
        if (i + 1 >= elements.size()) fail("truncated region pairs");
        const auto* idx = std::get_if<RegionIndexToken>(&elements[i]);
        if (idx == nullptr || idx->index != k) fail("expected <region" + std::to_string(k) + ">");
        ++i;
        const auto* slot = std::get_if<RegionTokenSlot>(&elements[i]);
        if (slot == nullptr || slot->index != k) fail("region token slot must follow its index token");
        ++i;
    }
    if (i >= elements.size() || !std::holds_alternative<Newline>(elements[i])) fail("expected newline after regions");
    for (++i; i < elements.size(); ++i) {
        if (!std::holds_alternative<TextToken>(elements[i])) fail("only text tokens may follow the region block");
    }
}

std::string RegionTokenSequence::render() const {
    std::string out;
    for (const SequenceElement& e : elements) {
        std::visit(Overloaded{
                       [&](const ImageTokenBlock&) { out += "<image_tokens>"; },
                       [&](const Newline&) { out += "\n"; },
                       [&](const RegionIndexToken& t) { out += region_tag(t.index); },
                       [&](const RegionTokenSlot&) { out += "<region_token>"; },
                       [&](const TextToken& t) { out += t.text; },
                   },
                   e);
    }
    return out;
}

RegionTokenSequence build_input_sequence(int n_image_tokens, std::vector<RegionToken> region_tokens,
                                         const std::vector<std::string>& text, RegionOrder order) {
    if (n_image_tokens < 0) throw ProtocolError("build_input_sequence: negative image token count");
    const int n = static_cast<int>(region_tokens.size());
    std::set<int> seen;
    for (const RegionToken& t : region_tokens) {
        if (t.index < 0 || t.index >= n) {
            throw ProtocolError("build_input_sequence: region index " + std::to_string(t.index) + " out of range");
        }
        if (!seen.insert(t.index).second) {
            throw ProtocolError("build_input_sequence: duplicate region index " + std::to_string(t.index));
        }
    }
    for (int k = 0; k < n; ++k) {
        if (region_tokens[k].index == k) continue;
        if (order == RegionOrder::Strict) {
            throw ProtocolError("build_input_sequence: region tokens not in ascending index order");
        }
        std::sort(region_tokens.begin(), region_tokens.end(),
                  [](const RegionToken& a, const RegionToken& b) { return a.index < b.index; });
        break;
    }

    RegionTokenSequence seq;
    seq.region_count = n;
    seq.elements.reserve(static_cast<std::size_t>(2 * n + 3) + text.size());
    seq.elements.emplace_back(ImageTokenBlock{n_image_tokens});
    seq.elements.emplace_back(Newline{});
    for (const RegionToken& t : region_tokens) {
        seq.elements.emplace_back(RegionIndexToken{t.index});
        seq.elements.emplace_back(RegionTokenSlot{t.index});
    }
    seq.elements.emplace_back(Newline{});
    for (const std::string& tok : text) seq.elements.emplace_back(TextToken{tok});
    return seq;
}

GrammarError::GrammarError(std::size_t offset, std::string production, const std::string& message)
    : std::runtime_error("offset " + std::to_string(offset) + " [" + production + "]: " + message),
      offset_(offset),
      production_(std::move(production)) {}

namespace {

class Parser {
public:
    Parser(std::string_view src, int n_regions) : src_(src), n_regions_(n_regions) {}

    GroundedResponse run() {
        GroundedResponse resp;
        std::string text;
        auto flush = [&] {
            if (!text.empty()) resp.nodes.emplace_back(Text{std::move(text)});
            text.clear();
        };
        while (pos_ < src_.size()) {
            const char c = src_[pos_];
            if (c == '>') fail(pos_, "text", "stray '>'");
            if (c != '<') {
                text.push_back(c);
                ++pos_;
                continue;
            }
            if (at(kRegionPrefix)) {
                flush();
                resp.nodes.emplace_back(BareRegionRef{region_ref()});
            } else if (at(kGroundOpen)) {
                flush();
                resp.nodes.emplace_back(grounded_span());
            } else if (at(kGroundClose) || at(kObjectOpen) || at(kObjectClose)) {
                fail(pos_, "response", "tag outside a grounded span");
            } else {
                fail(pos_, "response", "unknown or truncated tag");
            }
        }
        flush();
        return resp;
    }

private:
    [[noreturn]] void fail(std::size_t offset, const char* production, const std::string& msg) const {
        throw GrammarError(offset, production, msg);
    }

    bool at(std::string_view token) const { return src_.substr(pos_, token.size()) == token; }

    int region_ref() {
        const std::size_t start = pos_;
        pos_ += kRegionPrefix.size();
        const std::size_t digits_at = pos_;
        while (pos_ < src_.size() && src_[pos_] >= '0' && src_[pos_] <= '9') ++pos_;
        const std::size_t n_digits = pos_ - digits_at;
        if (n_digits == 0) fail(digits_at, "region_ref", "expected digits after '<region'");
        if (n_digits > kMaxIndexDigits) fail(digits_at, "region_ref", "region index too long");
        if (n_digits > 1 && src_[digits_at] == '0') fail(digits_at, "region_ref", "leading zero in region index");
        if (pos_ >= src_.size() || src_[pos_] != '>') fail(pos_, "region_ref", "expected '>' closing region tag");
        ++pos_;
        const int index = std::stoi(std::string(src_.substr(digits_at, n_digits)));
        if (index >= n_regions_) {
            fail(start, "region_ref",
                 "region index " + std::to_string(index) + " >= region count " + std::to_string(n_regions_));
        }
        return index;
    }

    GroundedSpan grounded_span() {
        const std::size_t open_at = pos_;
        pos_ += kGroundOpen.size();
        GroundedSpan span;
        while (pos_ < src_.size() && is_text_byte(src_[pos_])) span.phrase.push_back(src_[pos_++]);
        if (pos_ >= src_.size()) fail(open_at, "grounded_span", "unclosed <ground>");
        if (src_[pos_] == '>') fail(pos_, "grounded_span", "stray '>' inside phrase");
        if (at(kGroundOpen)) fail(pos_, "grounded_span", "nested <ground> spans are not allowed");
        if (!at(kGroundClose)) fail(pos_, "grounded_span", "expected </ground>");
        if (span.phrase.empty()) fail(pos_, "grounded_span", "empty grounded phrase");
        pos_ += kGroundClose.size();

        if (!at(kObjectOpen)) fail(pos_, "grounded_span", "<ground> must be followed by <object>");
        const std::size_t object_at = pos_;
        pos_ += kObjectOpen.size();
        while (pos_ < src_.size() && at(kRegionPrefix)) {
            const std::size_t ref_at = pos_;
            const int index = region_ref();
            if (std::find(span.regions.begin(), span.regions.end(), index) != span.regions.end()) {
                fail(ref_at, "grounded_span", "duplicate region index " + std::to_string(index));
            }
            span.regions.push_back(index);
        }
        if (pos_ >= src_.size()) fail(object_at, "grounded_span", "unclosed <object>");
        if (!at(kObjectClose)) fail(pos_, "grounded_span", "expected region_ref or </object>");
        if (span.regions.empty()) fail(pos_, "grounded_span", "empty <object> block");
        pos_ += kObjectClose.size();
        return span;
    }

    std::string_view src_;
    int n_regions_;
    std::size_t pos_ = 0;
};

void check_text(const std::string& s, const char* what) {
    if (!std::all_of(s.begin(), s.end(), is_text_byte)) {
        throw GrammarError(0, what, "text may not contain '<' or '>'");
    }
}

}  // namespace

GroundedResponse parse_grounded(std::string_view text, int n_regions) { return Parser(text, n_regions).run(); }

std::string serialize_grounded(const GroundedResponse& resp) {
    std::string out;
    bool prev_text = false;
    for (const ResponseNode& node : resp.nodes) {
        std::visit(Overloaded{
                       [&](const Text& t) {
                           if (t.text.empty()) throw GrammarError(0, "text", "empty text node");
                           if (prev_text) throw GrammarError(0, "text", "adjacent text nodes");
                           check_text(t.text, "text");
                           out += t.text;
                       },
                       [&](const GroundedSpan& s) {
                           if (s.phrase.empty()) throw GrammarError(0, "grounded_span", "empty grounded phrase");
                           if (s.regions.empty()) throw GrammarError(0, "grounded_span", "empty region list");
                           check_text(s.phrase, "grounded_span");
                           out += kGroundOpen;
                           out += s.phrase;
                           out += kGroundClose;
                           out += kObjectOpen;
                           for (std::size_t k = 0; k < s.regions.size(); ++k) {
                               if (s.regions[k] < 0) throw GrammarError(0, "region_ref", "negative region index");
                               if (std::find(s.regions.begin(), s.regions.begin() + k, s.regions[k]) !=
                                   s.regions.begin() + k) {
                                   throw GrammarError(0, "grounded_span", "duplicate region index");
                               }
                               out += region_tag(s.regions[k]);
                           }
                           out += kObjectClose;
                       },
                       [&](const BareRegionRef& r) {
                           if (r.index < 0) throw GrammarError(0, "region_ref", "negative region index");
                           out += region_tag(r.index);
                       },
                   },
                   node);
        prev_text = std::holds_alternative<Text>(node);
    }
    return out;
}

std::vector<std::pair<std::string, std::vector<int>>> bindings(const GroundedResponse& resp) {
    std::vector<std::pair<std::string, std::vector<int>>> out;
    for (const ResponseNode& node : resp.nodes) {
        if (const auto* s = std::get_if<GroundedSpan>(&node)) out.emplace_back(s->phrase, s->regions);
    }
    return out;
}

void validate_against(const GroundedResponse& resp, const RegionTokenSequence& seq) {
    auto check = [&](int index) {
        if (index < 0 || index >= seq.region_count) {
            throw ProtocolError("response references region " + std::to_string(index) +
                                " but the input sequence has " + std::to_string(seq.region_count) + " regions");
        }
    };
    for (const ResponseNode& node : resp.nodes) {
        if (const auto* s = std::get_if<GroundedSpan>(&node)) {
            for (int r : s->regions) check(r);
        } else if (const auto* b = std::get_if<BareRegionRef>(&node)) {
            check(b->index);
        }
    }
}

}  // namespace regionlens
