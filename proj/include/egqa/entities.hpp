#pragma once
// Closed entity/relation vocabularies and entity references.
// Ids are stored verbatim; comparisons at query time are case-insensitive.

#include <algorithm>
#include <array>
#include <cctype>
#include <string>
#include <string_view>

#include "egqa/time.hpp"

namespace egqa {

enum class EntityType { Person, Object, Location };
enum class RelationType { TalksTo, InteractsWith, Mentions, Uses };

constexpr std::array<EntityType, 3> kAllEntityTypes{EntityType::Person, EntityType::Object,
                                                    EntityType::Location};
constexpr std::array<RelationType, 4> kAllRelationTypes{
    RelationType::TalksTo, RelationType::InteractsWith, RelationType::Mentions,
    RelationType::Uses};

inline std::string_view to_string(EntityType t) {
    switch (t) {
        case EntityType::Person: return "Person";
        case EntityType::Object: return "Object";
        case EntityType::Location: return "Location";
    }
    return "?";
}

inline std::string_view to_string(RelationType r) {
    switch (r) {
        case RelationType::TalksTo: return "TALKS_TO";
        case RelationType::InteractsWith: return "INTERACTS_WITH";
        case RelationType::Mentions: return "MENTIONS";
        case RelationType::Uses: return "USES";
    }
    return "?";
}

inline EntityType parse_entity_type(std::string_view s) {
    for (EntityType t : kAllEntityTypes)
        if (s == to_string(t)) return t;
    throw ValidationError("unknown entity type: \"" + std::string(s) + "\"");
}

inline RelationType parse_relation_type(std::string_view s) {
    for (RelationType r : kAllRelationTypes)
        if (s == to_string(r)) return r;
    throw ValidationError("unknown relation type: \"" + std::string(s) + "\"");
}

inline bool is_entity_type(std::string_view s) {
    for (EntityType t : kAllEntityTypes)
        if (s == to_string(t)) return true;
    return false;
}

inline bool is_relation_type(std::string_view s) {
    for (RelationType r : kAllRelationTypes)
        if (s == to_string(r)) return true;
    return false;
}

inline std::string trim_copy(std::string_view s) {
    auto issp = [](unsigned char c) { return std::isspace(c) != 0; };
    size_t b = 0, e = s.size();
    while (b < e && issp(s[b])) ++b;
    while (e > b && issp(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

inline std::string lower_copy(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

inline bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(), [](unsigned char x, unsigned char y) {
               return std::tolower(x) == std::tolower(y);
           });
}

inline bool icontains(std::string_view haystack, std::string_view needle) {
    if (needle.empty()) return true;
    return lower_copy(haystack).find(lower_copy(needle)) != std::string::npos;
}

// Longest whitespace-delimited token of an id; used by the substring
// relaxation stage ("Katrina's luggage" -> "Katrina's").
inline std::string longest_token(std::string_view id) {
    std::string best, cur;
    auto flush = [&] {
        if (cur.size() > best.size()) best = cur;
        cur.clear();
    };
    for (char c : id) {
        if (std::isspace(static_cast<unsigned char>(c)))
            flush();
        else
            cur.push_back(c);
    }
    flush();
    return best;
}

// A named node: id is a human-readable name (never a bare integer),
// stored verbatim.
struct EntityRef {
    std::string id;
    EntityType etype = EntityType::Object;

    void validate() const {
        if (trim_copy(id).empty()) throw ValidationError("EntityRef: empty id");
    }

    bool operator==(const EntityRef&) const = default;
};

}  // namespace egqa
