#include <doctest.h>

#include "coldrec/text_encoder.hpp"
#include "support/tmpdir.hpp"

using namespace coldrec;

TEST_CASE("hashing encoder emits deterministic unit vectors") {
    HashingTextEncoder enc(64);
    CHECK(enc.dim() == 64);
    auto a = enc.encode("red ceramic mug");
    auto b = enc.encode("red ceramic mug");
    CHECK((a - b).norm() == doctest::Approx(0.0));
    CHECK(a.norm() == doctest::Approx(1.0));
    CHECK(a.size() == 64);

    auto c = enc.encode("blue ceramic mug");
    CHECK((a - c).norm() > 1e-3);
}

TEST_CASE("hashing encoder maps empty text to e0") {
    HashingTextEncoder enc(16);
    auto v = enc.encode("");
    CHECK(v(0) == doctest::Approx(1.0));
    CHECK(v.norm() == doctest::Approx(1.0));
}

TEST_CASE("encode_item is invariant to attribute order") {
    HashingTextEncoder enc(32);
    auto a = enc.encode_item({"mug", "red", "ceramic"});
    auto b = enc.encode_item({"ceramic", "mug", "red"});
    CHECK((a - b).norm() == doctest::Approx(0.0));
    CHECK((a - enc.encode("ceramic mug red")).norm() == doctest::Approx(0.0));
}

TEST_CASE("similar texts overlap more than unrelated texts") {
    HashingTextEncoder enc(256);
    auto a = enc.encode("red ceramic mug");
    auto b = enc.encode("red ceramic bowl");
    auto c = enc.encode("industrial lathe chuck");
    CHECK(a.dot(b) > a.dot(c));
}

TEST_CASE("precomputed encoder loads, renormalizes and rejects unknown text") {
    testsupport::TempDir dir("enc");
    testsupport::write_file(dir.file("vecs.jsonl"),
                            R"({"text":"red mug","vector":[3.0,4.0]})"
                            "\n"
                            R"({"text":"blue mug","vector":[0.0,2.0]})"
                            "\n");
    auto enc = PrecomputedTextEncoder::load(dir.file("vecs.jsonl"));
    CHECK(enc->dim() == 2);
    auto v = enc->encode("red mug");
    CHECK(v(0) == doctest::Approx(0.6));
    CHECK(v(1) == doctest::Approx(0.8));
    CHECK_THROWS(enc->encode("green mug"));
}

TEST_CASE("precomputed encoder rejects inconsistent dimensions") {
    testsupport::TempDir dir("enc-bad");
    testsupport::write_file(dir.file("vecs.jsonl"),
                            R"({"text":"a","vector":[1.0,0.0]})"
                            "\n"
                            R"({"text":"b","vector":[1.0]})"
                            "\n");
    CHECK_THROWS(PrecomputedTextEncoder::load(dir.file("vecs.jsonl")));
}
