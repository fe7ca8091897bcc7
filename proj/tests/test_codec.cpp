#include "hvslu/codec.hpp"
#include "hvslu/corpus.hpp"
#include "hvslu/rng.hpp"

#include <gtest/gtest.h>

using namespace hvslu;

namespace {

const OutputAlphabet& date_city() {
  static const OutputAlphabet a = OutputAlphabet::slu("abcdefghijklmnopqrstuvwxyz", {"date", "city"});
  return a;
}

int ch(char c) { return *date_city().char_id(c); }

}  // namespace

TEST(Alphabet, LayoutAndPrefix) {
  const auto& slu = date_city();
  const auto asr = OutputAlphabet::asr("abcdefghijklmnopqrstuvwxyz");
  EXPECT_EQ(asr.size(), 28);
  EXPECT_EQ(slu.size(), 28 + 2 + 1);
  EXPECT_EQ(slu.blank_id(), 0);
  EXPECT_EQ(slu.space_id(), 1);
  EXPECT_EQ(*slu.concept_id("date"), 28);
  EXPECT_EQ(*slu.concept_id("city"), 29);
  EXPECT_EQ(slu.close_id(), 30);
  EXPECT_TRUE(asr.is_prefix_of(slu));
  EXPECT_FALSE(slu.is_prefix_of(asr));
  EXPECT_EQ(asr.with_concepts({"date", "city"}), slu);
  EXPECT_EQ(OutputAlphabet::from_listing(slu.listing()), slu);
  EXPECT_EQ(OutputAlphabet::from_listing(asr.listing()), asr);
}

TEST(Alphabet, OneCloseSymbolRegardlessOfConcepts) {
  std::vector<std::string> many;
  for (int i = 0; i < 20; ++i) many.push_back("c" + std::to_string(i));
  const auto a = OutputAlphabet::slu("ab", many);
  int closes = 0;
  for (int id = 0; id < a.size(); ++id) closes += a.is_close(id) ? 1 : 0;
  EXPECT_EQ(closes, 1);
}

TEST(Alphabet, RejectsBadInventories) {
  EXPECT_THROW(OutputAlphabet::asr("aab"), CodecError);
  EXPECT_THROW(OutputAlphabet::asr("a b"), CodecError);
  EXPECT_THROW(OutputAlphabet::slu("ab", {"x", "x"}), CodecError);
  EXPECT_THROW(OutputAlphabet::slu("ab", {"Bad Tag"}), CodecError);
}

TEST(Encode, TaggedDate) {
  const auto ids = encode_transcript(date_city(), "<date> may </>");
  const int open = *date_city().concept_id("date"), sp = 1, close = date_city().close_id();
  EXPECT_EQ(ids, (std::vector<int>{open, sp, ch('m'), ch('a'), ch('y'), sp, close}));
}

TEST(Encode, NoTags) { EXPECT_EQ(encode_transcript(date_city(), "hi"), (std::vector<int>{ch('h'), ch('i')})); }

TEST(Encode, NeverEmitsBlank) {
  for (int id : encode_transcript(date_city(), "on <date> june first </> in <city> rome </>")) EXPECT_NE(id, 0);
}

TEST(Encode, Errors) {
  EXPECT_THROW(encode_transcript(date_city(), "<price> ten </>"), CodecError);
  EXPECT_THROW(encode_transcript(date_city(), "caf\xc3\xa9"), CodecError);
  EXPECT_THROW(encode_transcript(date_city(), "<date> may"), CodecError);
  EXPECT_THROW(encode_transcript(date_city(), "may </>"), CodecError);
  EXPECT_THROW(encode_transcript(date_city(), "<date> <city> rome </> </>"), CodecError);
  EXPECT_THROW(encode_transcript(date_city(), "<date> </>"), CodecError);
  EXPECT_THROW(encode_transcript(date_city(), "two  spaces"), CodecError);
  EXPECT_THROW(encode_transcript(OutputAlphabet::asr("abcdefghijklmnopqrstuvwxyz"), "<date> may </>"),
               CodecError);
}

TEST(Decode, InverseOfEncode) {
  const auto d = decode_symbols(date_city(), encode_transcript(date_city(), "<date> may </>"));
  EXPECT_EQ(d.plain, "may");
  ASSERT_EQ(d.concepts.size(), 1u);
  EXPECT_EQ(d.concepts[0], (std::pair<std::string, std::string>{"date", "may"}));
  EXPECT_EQ(d.tagged, "<date> may </>");
}

TEST(Decode, MissingCloseIsRepaired) {
  const int open = *date_city().concept_id("date");
  const auto d = decode_symbols(date_city(), std::vector<int>{open, ch('m'), ch('a'), ch('y')});
  ASSERT_EQ(d.concepts.size(), 1u);
  EXPECT_EQ(d.concepts[0], (std::pair<std::string, std::string>{"date", "may"}));
}

TEST(Decode, OpenEndsAtNextOpen) {
  const int date = *date_city().concept_id("date"), city = *date_city().concept_id("city");
  const auto d = decode_symbols(date_city(), std::vector<int>{date, ch('m'), ch('a'), ch('y'), 1, city, ch('r'),
                                                              ch('o'), ch('m'), ch('e'), date_city().close_id()});
  ASSERT_EQ(d.concepts.size(), 2u);
  EXPECT_EQ(d.concepts[0].second, "may");
  EXPECT_EQ(d.concepts[1], (std::pair<std::string, std::string>{"city", "rome"}));
  EXPECT_EQ(d.plain, "may rome");
}

TEST(Decode, StrayCloseDropped) {
  const auto d = decode_symbols(date_city(), std::vector<int>{date_city().close_id(), ch('h'), ch('i')});
  EXPECT_EQ(d.plain, "hi");
  EXPECT_TRUE(d.concepts.empty());
}

TEST(Decode, ValuesTrimmedAndInnerSpacesKept) {
  const auto d = decode_symbols(
      date_city(), encode_transcript(date_city(), "on <date> june first </> ok"));
  EXPECT_EQ(d.concepts[0].second, "june first");
  EXPECT_EQ(d.plain, "on june first ok");
}

TEST(Decode, TotalOnFuzzedSequences) {
  Rng rng(51);
  const int size = date_city().size();
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<int> ids;
    const int n = static_cast<int>(rng.uniform_int(0, 30));
    for (int i = 0; i < n; ++i) ids.push_back(static_cast<int>(rng.uniform_int(0, size - 1)));
    EXPECT_NO_THROW(decode_symbols(date_city(), ids));
  }
}

TEST(RoundTrip, EveryGeneratedUtterance) {
  GeneratorConfig c;
  c.n_dialogs = 60;
  const Corpus corpus = generate_corpus(c);
  const auto alphabet = OutputAlphabet::slu(c.graphemes, c.concept_tags());
  for (const auto& p : corpus.pairs) {
    const auto d = decode_symbols(alphabet, encode_transcript(alphabet, p.user.tagged));
    EXPECT_EQ(d.plain, p.user.plain);
    EXPECT_EQ(d.concepts, p.user.tag_values());
    EXPECT_EQ(d.tagged, p.user.tagged);
  }
}

TEST(Transcript, ParseSpansAndStrip) {
  const auto t = ConceptTaggedTranscript::parse("book <city> new york </> now");
  EXPECT_EQ(t.plain, "book new york now");
  ASSERT_EQ(t.concepts.size(), 1u);
  EXPECT_EQ(t.concepts[0].tag, "city");
  EXPECT_EQ(t.concepts[0].value, "new york");
  EXPECT_EQ(t.plain.substr(t.concepts[0].begin, t.concepts[0].end - t.concepts[0].begin), "new york");
  EXPECT_EQ(strip_tags("book <city> rome </>"), "book rome");
}

TEST(Bag, Presence) {
  const std::vector<std::string> inv = {"date", "city", "price"};
  EXPECT_EQ(bag_of_concepts(ConceptTaggedTranscript::parse("<date> may </> for <price> ten </>"), inv).bits,
            (std::vector<std::uint8_t>{1, 0, 1}));
  EXPECT_EQ(bag_of_concepts(ConceptTaggedTranscript::parse("hello"), inv).bits,
            (std::vector<std::uint8_t>{0, 0, 0}));
  const auto twice = bag_of_concepts(ConceptTaggedTranscript::parse("<date> may </> or <date> june </>"), inv);
  EXPECT_EQ(twice.bits[0], 1);
  EXPECT_EQ(twice.count(), 1u);
  EXPECT_THROW(bag_of_concepts(ConceptTaggedTranscript::parse("<room> one </>"), inv), CodecError);
}
