#include <catch2/catch_amalgamated.hpp>

#include "egqa/entities.hpp"

using namespace egqa;

TEST_CASE("entity type parse o print is the identity on the closed set") {
    for (EntityType t : kAllEntityTypes) CHECK(parse_entity_type(to_string(t)) == t);
    CHECK_THROWS_AS(parse_entity_type("Animal"), ValidationError);
    CHECK_THROWS_AS(parse_entity_type("person"), ValidationError);  // exact case only
    CHECK_THROWS_AS(parse_entity_type(""), ValidationError);
}

TEST_CASE("relation type parse o print is the identity on the closed set") {
    for (RelationType r : kAllRelationTypes) CHECK(parse_relation_type(to_string(r)) == r);
    CHECK_THROWS_AS(parse_relation_type("LIKES"), ValidationError);
    CHECK_THROWS_AS(parse_relation_type("talks-to"), ValidationError);
}

TEST_CASE("string helpers") {
    CHECK(trim_copy("  Jake \t") == "Jake");
    CHECK(lower_copy("MicroWave") == "microwave");
    CHECK(iequals("JAKE", "jake"));
    CHECK_FALSE(iequals("Jake", "Jak"));
    CHECK(icontains("Katrina's luggage", "LUGGAGE"));
    CHECK_FALSE(icontains("phone", "microwave"));
}

TEST_CASE("longest_token picks the longest whitespace-delimited word") {
    CHECK(longest_token("Katrina's luggage") == "Katrina's");
    CHECK(longest_token("mobile phone") == "mobile");
    CHECK(longest_token("Jake") == "Jake");
    CHECK(longest_token("   ") == "");
}

TEST_CASE("EntityRef validation") {
    EntityRef ok{"Jake", EntityType::Person};
    CHECK_NOTHROW(ok.validate());
    EntityRef blank{"  ", EntityType::Person};
    CHECK_THROWS_AS(blank.validate(), ValidationError);
}
