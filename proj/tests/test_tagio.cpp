#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <random>
#include <sstream>
#include <vector>

#include "mpspec/tagio.hpp"
#include "support/oracles.hpp"

using namespace mpspec;

TEST(Quantize, Examples) {
  EXPECT_EQ(quantize(150000.0, 156), 961u);
  EXPECT_EQ(quantize(0.0, 156), 0u);
  EXPECT_EQ(quantize(155.0, 156), 0u);
  EXPECT_EQ(quantize(156.0, 156), 1u);
  EXPECT_THROW(quantize(-1.0, 156), ContractViolation);
}

TEST(Quantize, ErrorWithinOneTick) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> t(0, 3.6e15);
  for (int i = 0; i < 100000; ++i) {
    const double x = t(rng);
    const double err = x - static_cast<double>(quantize(x, 156)) * 156.0;
    ASSERT_GE(err, 0.0);
    ASSERT_LT(err, 156.0);
  }
}

TEST(WriteStream, EmptyIsHeaderOnly) {
  const auto bytes = write_stream(StreamHeader{}, {});
  ASSERT_EQ(bytes.size(), 16u);
  const unsigned char expect[16] = {'T', 'T', 'A', 'G', 1, 0, 32, 0, 156, 0, 0, 0, 0, 0, 0, 0};
  for (int i = 0; i < 16; ++i) EXPECT_EQ(static_cast<unsigned char>(bytes[i]), expect[i]) << i;
}

TEST(WriteStream, RecordLayout) {
  const std::vector<TimeTag> tags{{5, 961}};
  const auto bytes = write_stream(StreamHeader{}, tags);
  ASSERT_EQ(bytes.size(), 25u);
  const unsigned char expect[9] = {0x05, 0xC1, 0x03, 0, 0, 0, 0, 0, 0};
  for (int i = 0; i < 9; ++i) EXPECT_EQ(static_cast<unsigned char>(bytes[16 + i]), expect[i]) << i;
}

TEST(WriteStream, LargeTicksLittleEndian) {
  const std::vector<TimeTag> tags{{31, 0x0102030405060708ull}};
  const auto bytes = write_stream(StreamHeader{}, tags);
  const unsigned char expect[9] = {31, 8, 7, 6, 5, 4, 3, 2, 1};
  for (int i = 0; i < 9; ++i) EXPECT_EQ(static_cast<unsigned char>(bytes[16 + i]), expect[i]) << i;
}

TEST(WriteStream, ContractViolations) {
  const std::vector<TimeTag> unsorted{{1, 10}, {2, 5}};
  EXPECT_THROW(write_stream(StreamHeader{}, unsorted), ContractViolation);
  const std::vector<TimeTag> bad_channel{{32, 10}};
  EXPECT_THROW(write_stream(StreamHeader{}, bad_channel), ContractViolation);
}

TEST(ReadStream, RoundTripEchoesHeader) {
  StreamHeader h;
  h.channel_count = 16;
  h.tick_ps = 81;
  const std::vector<TimeTag> tags{{0, 1}, {15, 1}, {3, 400}};
  const auto back = read_stream(write_stream(h, tags));
  EXPECT_EQ(back.header, h);
  EXPECT_EQ(back.header.tick_ps, 81u);
  EXPECT_EQ(back.header.record_count, 3u);
  EXPECT_EQ(back.tags, tags);
}

TEST(ReadStream, BadMagic) {
  auto bytes = write_stream(StreamHeader{}, {});
  bytes[0] = bytes[1] = bytes[2] = bytes[3] = 'X';
  EXPECT_THROW(read_stream(bytes), FormatError);
}

TEST(ReadStream, BadVersion) {
  auto bytes = write_stream(StreamHeader{}, {});
  bytes[4] = 2;
  try {
    read_stream(bytes);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 4u);
  }
}

TEST(ReadStream, TruncatedRecordReportsOffset) {
  std::vector<char> bytes = write_stream(StreamHeader{}, {});
  bytes.insert(bytes.end(), {1, 2, 3, 4, 5});
  ASSERT_EQ(bytes.size(), 21u);
  try {
    read_stream(bytes);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 16u);
    EXPECT_EQ(e.exit_code(), 4);
  }
  // Truncation after one good record is reported at that record's end.
  const std::vector<TimeTag> one{{1, 2}};
  bytes = write_stream(StreamHeader{}, one);
  bytes.push_back(7);
  try {
    read_stream(bytes);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 25u);
  }
}

TEST(ReadStream, TruncatedHeader) {
  const std::vector<char> bytes{'T', 'T', 'A'};
  EXPECT_THROW(read_stream(bytes), FormatError);
}

TEST(ReadStream, NonMonotonicTicksIsIntegrityError) {
  auto bytes = write_stream(StreamHeader{}, std::vector<TimeTag>{{1, 5}, {1, 6}});
  bytes[16 + 9 + 1] = 4;  // second record ticks 6 -> 4
  EXPECT_THROW(read_stream(bytes), IntegrityError);
}

TEST(ReadStream, ChannelBeyondHeaderIsIntegrityError) {
  StreamHeader h;
  h.channel_count = 4;
  auto bytes = write_stream(h, std::vector<TimeTag>{{1, 5}});
  bytes[16] = 9;
  EXPECT_THROW(read_stream(bytes), IntegrityError);
}

TEST(ReadStream, LazyReaderYieldsInFileOrder) {
  const std::vector<TimeTag> tags{{2, 1}, {1, 3}, {0, 3}, {7, 99}};
  const auto bytes = write_stream(StreamHeader{}, tags);
  std::istringstream is(std::string(bytes.begin(), bytes.end()));
  StreamReader r(is);
  for (const auto& t : tags) {
    auto got = r.next();
    ASSERT_TRUE(got);
    EXPECT_EQ(*got, t);
  }
  EXPECT_FALSE(r.next());
}

TEST(StreamFile, RoundTripOnDiskAndMissingFile) {
  const auto path = std::filesystem::temp_directory_path() / "mpspec_tagio_test.ttag";
  std::mt19937_64 rng(5);
  const auto tags = oracle::random_tags(rng, 5000, 1'000'000'000ull, 32);
  write_stream_file(path.string(), StreamHeader{}, tags);
  EXPECT_EQ(std::filesystem::file_size(path), 16u + 9u * tags.size());
  EXPECT_EQ(read_stream_file(path.string()).tags, tags);
  std::filesystem::remove(path);
  EXPECT_THROW(read_stream_file(path.string()), IoError);
  EXPECT_THROW(write_stream_file("/nonexistent-dir/x.ttag", StreamHeader{}, tags), IoError);
}

TEST(FormatProperty, RandomListsRoundTrip) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> len(0, 300);
  std::uniform_int_distribution<int> ch(1, 255);
  for (int trial = 0; trial < 200; ++trial) {
    StreamHeader h;
    h.channel_count = static_cast<std::uint8_t>(ch(rng));
    const auto tags = oracle::random_tags(rng, len(rng), ~0ull, h.channel_count);
    const auto bytes = write_stream(h, tags);
    ASSERT_EQ(bytes.size(), 16u + 9u * tags.size());
    const auto back = read_stream(bytes);
    ASSERT_EQ(back.header, h);
    ASSERT_EQ(back.tags, tags);
  }
}

TEST(MergeStreams, Examples) {
  const std::vector<TimeTag> a{{1, 1}, {1, 4}, {1, 9}};
  const std::vector<TimeTag> b{{2, 2}, {2, 4}, {2, 8}};
  std::vector<std::vector<TimeTag>> with_empty{a, {}};
  EXPECT_EQ(merge_streams(with_empty), a);
  std::vector<std::vector<TimeTag>> two{b, a};
  const std::vector<TimeTag> expect{{1, 1}, {2, 2}, {1, 4}, {2, 4}, {2, 8}, {1, 9}};
  EXPECT_EQ(merge_streams(two), expect);
}

TEST(MergeStreams, EqualTicksOrderedByChannel) {
  std::vector<std::vector<TimeTag>> s{{{9, 5}}, {{3, 5}}, {{6, 5}}};
  const std::vector<TimeTag> expect{{3, 5}, {6, 5}, {9, 5}};
  EXPECT_EQ(merge_streams(s), expect);
}

TEST(MergeStreams, UnsortedInputDetected) {
  std::vector<std::vector<TimeTag>> s{{{1, 5}, {1, 2}}, {{2, 3}}};
  EXPECT_THROW(merge_streams(s), IntegrityError);
}

TEST(MergeStreams, EqualsSortOfConcatenation) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<TimeTag>> s;
    std::vector<TimeTag> all;
    for (int k = 0; k < 5; ++k) {
      s.push_back(oracle::random_tags(rng, 200, 1000, 16));
      all.insert(all.end(), s.back().begin(), s.back().end());
    }
    std::sort(all.begin(), all.end());
    ASSERT_EQ(merge_streams(s), all);
  }
}

TEST(ToTimeTags, QuantizesAndOrdersByChannelWithinTick) {
  const std::vector<AvalancheEvent> ev{{100.0, 7, AvalancheCause::photon}, {150.0, 2, AvalancheCause::dark},
                                       {150000.0, 1, AvalancheCause::photon}};
  const std::vector<TimeTag> expect{{2, 0}, {7, 0}, {1, 961}};
  EXPECT_EQ(to_time_tags(ev), expect);
}
