#pragma once
// Random valid grounded responses and byte-level mutations of their strings.

#include <random>
#include <string>

#include "regionlens/tokenproto.hpp"

namespace gen {

inline std::string random_text(std::mt19937_64& rng, int max_len = 12) {
    static const std::string alphabet = "abcdefghij KLMN.,;!?0123456789\n\t\"'/()[]{}=-_";
    std::uniform_int_distribution<int> len(1, max_len);
    std::uniform_int_distribution<std::size_t> ch(0, alphabet.size() - 1);
    std::string s;
    for (int i = len(rng); i > 0; --i) s.push_back(alphabet[ch(rng)]);
    return s;
}

inline regionlens::GroundedResponse random_response(std::mt19937_64& rng, int n_regions) {
    using namespace regionlens;
    std::uniform_int_distribution<int> n_nodes(0, 7), kind(0, 2), region(0, n_regions - 1);
    GroundedResponse r;
    bool prev_text = false;
    for (int k = n_nodes(rng); k > 0; --k) {
        int which = kind(rng);
        if (which == 0 && prev_text) which = 1;
        if (which == 0) {
            r.nodes.emplace_back(Text{random_text(rng)});
        } else if (which == 1) {
            GroundedSpan s{random_text(rng, 8), {}};
            std::uniform_int_distribution<int> n_refs(1, std::min(4, n_regions));
            for (int m = n_refs(rng); m > 0;) {
                const int idx = region(rng);
                if (std::find(s.regions.begin(), s.regions.end(), idx) != s.regions.end()) continue;
                s.regions.push_back(idx);
                --m;
            }
            r.nodes.emplace_back(std::move(s));
        } else {
            r.nodes.emplace_back(BareRegionRef{region(rng)});
        }
        prev_text = which == 0;
    }
    return r;
}

/// Random edits biased toward protocol bytes: insert, delete, replace, or
/// splice a tag fragment.
inline std::string mutate(std::string s, std::mt19937_64& rng) {
    static const char* fragments[] = {"<", ">", "<ground>", "</ground>", "<object>", "</object>", "<region",
                                      "<region1", "<region007>", "<region99999999999>", "</", "<regionx>", "\0"};
    std::uniform_int_distribution<int> op(0, 3), n_edits(1, 3);
    std::uniform_int_distribution<std::size_t> frag(0, std::size(fragments) - 1);
    std::uniform_int_distribution<int> byte(0, 255);
    for (int e = n_edits(rng); e > 0; --e) {
        std::uniform_int_distribution<std::size_t> at(0, s.size());
        const std::size_t p = at(rng);
        switch (op(rng)) {
            case 0: s.insert(p, 1, static_cast<char>(byte(rng))); break;
            case 1:
                if (!s.empty()) s.erase(std::min(p, s.size() - 1), 1);
                break;
            case 2:
                if (!s.empty()) s[std::min(p, s.size() - 1)] = static_cast<char>(byte(rng));
                break;
            default: s.insert(p, fragments[frag(rng)]); break;
        }
    }
    return s;
}

/// Edits that always break the grammar. Valid strings hold exactly as many
/// '<' as '>' bytes and every '<' opens a known tag, so unbalancing the angle
/// brackets, cutting a tag, emptying or removing an object block, nesting a span
/// or pointing past the region count each leave no parse. `n_regions` is the
/// count the result will be parsed against.
inline std::string invalidate(std::string s, int n_regions, std::mt19937_64& rng) {
    const std::size_t ground = s.find("<ground>");
    const std::size_t obj = s.find("<object>");
    const std::size_t ref = s.find("<region");
    std::uniform_int_distribution<int> op(0, 7);
    std::uniform_int_distribution<std::size_t> at(0, s.size());
    switch (op(rng)) {
        case 0: s.insert(at(rng), 1, '>'); return s;
        case 1: s.insert(at(rng), 1, '<'); return s;
        case 2: {
            const std::size_t lt = s.find('<', at(rng));
            if (lt == std::string::npos) break;
            const std::size_t gt = s.find('>', lt);
            std::uniform_int_distribution<std::size_t> cut(lt, gt - 1);
            return s.substr(0, cut(rng) + 1);
        }
        case 3:
            if (obj == std::string::npos) break;
            return s.substr(0, obj) + s.substr(s.find("</object>", obj) + 9);
        case 4:
            if (obj == std::string::npos) break;
            return s.substr(0, obj + 8) + s.substr(s.find("</object>", obj));
        case 5:
            if (ground == std::string::npos) break;
            return s.insert(ground + 8, "<ground>");
        case 6:
            if (ref == std::string::npos) break;
            return s.substr(0, ref + 7) + std::to_string(n_regions + rng() % 50) + s.substr(s.find('>', ref));
        default: {
            const std::size_t gt = s.find('>', at(rng));
            if (gt == std::string::npos) break;
            return s.erase(gt, 1);
        }
    }
    s.insert(at(rng), 1, '>');
    return s;
}

}  // namespace gen
