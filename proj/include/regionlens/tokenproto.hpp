#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "regionlens/hfre.hpp"

namespace regionlens {

// ---------------------------------------------------------------------------
// Input side: <image_tokens>\n<region0><region_token>...<regionN-1><region_token>\n<text_tokens>
// ---------------------------------------------------------------------------

struct ImageTokenBlock {
    int count = 0;
    bool operator==(const ImageTokenBlock&) const = default;
};
struct Newline {
    bool operator==(const Newline&) const = default;
};
struct RegionIndexToken {
    int index = 0;
    bool operator==(const RegionIndexToken&) const = default;
};
/// Placeholder for the k-th region token embedding.
struct RegionTokenSlot {
    int index = 0;
    bool operator==(const RegionTokenSlot&) const = default;
};
struct TextToken {
    std::string text;
    bool operator==(const TextToken&) const = default;
};

using SequenceElement = std::variant<ImageTokenBlock, Newline, RegionIndexToken, RegionTokenSlot, TextToken>;

struct RegionTokenSequence {
    std::vector<SequenceElement> elements;
    int region_count = 0;

    /// Throws ProtocolError if the layout invariants do not hold.
    void validate() const;
    /// Human-readable rendering with the protocol symbols spelled out.
    std::string render() const;
};

class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class RegionOrder { Strict, Canonicalize };

/// Region tokens must carry indices 0..N-1. With RegionOrder::Strict any other
/// order is rejected; Canonicalize sorts them first.
RegionTokenSequence build_input_sequence(int n_image_tokens, std::vector<RegionToken> region_tokens,
                                         const std::vector<std::string>& text,
                                         RegionOrder order = RegionOrder::Strict);

// ---------------------------------------------------------------------------
// Output side: grounded responses
//   response      := ( text | grounded_span | region_ref )*
//   grounded_span := "<ground>" text "</ground>" "<object>" region_ref+ "</object>"
//   region_ref    := "<region" digits ">"
// ---------------------------------------------------------------------------

struct Text {
    std::string text;
    bool operator==(const Text&) const = default;
};
struct GroundedSpan {
    std::string phrase;
    std::vector<int> regions;
    bool operator==(const GroundedSpan&) const = default;
};
struct BareRegionRef {
    int index = 0;
    bool operator==(const BareRegionRef&) const = default;
};

using ResponseNode = std::variant<Text, GroundedSpan, BareRegionRef>;

struct GroundedResponse {
    std::vector<ResponseNode> nodes;
    bool operator==(const GroundedResponse&) const = default;
};

/// Structured parse failure: byte offset into the input, violated production, message.
class GrammarError : public std::runtime_error {
public:
    GrammarError(std::size_t offset, std::string production, const std::string& message);

    std::size_t offset() const { return offset_; }
    const std::string& production() const { return production_; }

private:
    std::size_t offset_;
    std::string production_;
};

GroundedResponse parse_grounded(std::string_view text, int n_regions);

/// Throws GrammarError (offset 0) for ASTs that have no valid serialization.
std::string serialize_grounded(const GroundedResponse& resp);

std::vector<std::pair<std::string, std::vector<int>>> bindings(const GroundedResponse& resp);

/// Checks that every referenced region exists in the paired input sequence.
void validate_against(const GroundedResponse& resp, const RegionTokenSequence& seq);

std::string region_tag(int index);

}  // namespace regionlens
