#include <doctest.h>

#include <fstream>

#include "evfleet/demand.hpp"
#include "fixtures.hpp"

using namespace evfleet;
using namespace evfleet::demand;

namespace {

const char* kHeader =
    "VendorID,tpep_pickup_datetime,tpep_dropoff_datetime,passenger_count,trip_distance,PULocationID,DOLocationID,"
    "fare_amount\n";

std::string write_file(const std::filesystem::path& dir, const std::string& name, const std::string& body) {
  const auto path = (dir / name).string();
  std::ofstream(path) << body;
  return path;
}

}  // namespace

TEST_CASE("timestamps in the supported formats") {
  CHECK(parse_time("2019-01-01 00:15:00", TimeFormat::Iso) == 1546301700);
  CHECK(parse_time("2019-01-01T00:15:00", TimeFormat::Iso) == 1546301700);
  CHECK(parse_time("01/01/2019 12:15:00 AM", TimeFormat::UsMeridiem) == 1546301700);
  CHECK(parse_time("01/01/2019 12:15:00 PM", TimeFormat::UsMeridiem) == 1546301700 + 12 * 3600);
  CHECK(parse_time("01/01/2019 01:15:00 PM", TimeFormat::UsMeridiem) == 1546301700 + 13 * 3600);
  CHECK(parse_time("1546301700", TimeFormat::UnixSeconds) == 1546301700);
  CHECK(parse_time("2020-02-29 23:59:59", TimeFormat::Iso) == 1583020799);
  CHECK_FALSE(parse_time("2019-02-29 00:00:00", TimeFormat::Iso));
  CHECK_FALSE(parse_time("2019-01-01 24:00:00", TimeFormat::Iso));
  CHECK_FALSE(parse_time("13/01/2019 01:00:00 AM", TimeFormat::UsMeridiem));
  CHECK_FALSE(parse_time("garbage", TimeFormat::Iso));
  CHECK(format_iso_time(1546301700) == "2019-01-01 00:15:00");
}

TEST_CASE("delimited splitting honours quotes") {
  CHECK(split_delimited("a,b,,c", ',') == std::vector<std::string>{"a", "b", "", "c"});
  CHECK(split_delimited("\"x,y\",z", ',') == std::vector<std::string>{"x,y", "z"});
  CHECK(split_delimited("\"say \"\"hi\"\"\",1", ',') == std::vector<std::string>{"say \"hi\"", "1"});
  CHECK(split_delimited("a;b", ';') == std::vector<std::string>{"a", "b"});
}

TEST_CASE("trip reader skips malformed rows and converts units") {
  const auto dir = fixtures::temp_dir("reader");
  const auto path = write_file(dir, "trips.csv",
                               std::string(kHeader) +
                                   "1,2019-01-01 00:10:00,2019-01-01 00:30:00,1,2.0,4,5,10.5\n"
                                   "1,2019-01-01 00:20:00,2019-01-01 00:10:00,1,2.0,4,5,10.5\n"  // ends before it starts
                                   "1,2019-01-01 00:20:00,2019-01-01 00:40:00,1,-1,4,5,10.5\n"   // negative distance
                                   "1,2019-01-01 00:20:00,2019-01-01 00:40:00,1,1,4,5,-3\n"      // negative fare
                                   "1,not a time,2019-01-01 00:40:00,1,1,4,5,3\n"
                                   "1,2019-01-01 00:20:00\n"
                                   "1,2019-01-01 00:50:00,2019-01-01 01:00:00,1,1.0,9,4,7\n");
  TripReader reader(path, ColumnMapping{});
  TripRecord r;
  REQUIRE(reader.next(r));
  CHECK(r.pickup_time == 1546301400);
  CHECK(r.duration_hours() == doctest::Approx(1.0 / 3.0));
  CHECK(r.distance_km == doctest::Approx(2.0 * 1.609344));
  CHECK(r.pickup_zone == 4);
  CHECK(r.dropoff_zone == 5);
  CHECK(r.fare == 10.5);
  REQUIRE(reader.next(r));
  CHECK(r.pickup_zone == 9);
  CHECK_FALSE(reader.next(r));
  CHECK(reader.malformed() == 5);
  CHECK(reader.rows_read() == 7);

  TripReader filtered(path, ColumnMapping{}, std::set<ZoneId>{4, 5});
  int n = 0;
  while (filtered.next(r)) ++n;
  CHECK(n == 1);
  CHECK(filtered.filtered() == 1);
}

TEST_CASE("a missing column is an ingest error") {
  const auto dir = fixtures::temp_dir("badcols");
  const auto path = write_file(dir, "trips.csv", "a,b,c\n1,2,3\n");
  CHECK_THROWS_AS(TripReader(path, ColumnMapping{}), IngestError);
  CHECK_THROWS_AS(TripReader((dir / "missing.csv").string(), ColumnMapping{}), IngestError);
}

TEST_CASE("job stream releases in pickup order with sequential ids") {
  const auto dir = fixtures::temp_dir("stream");
  const std::string rows =
      "1,2019-01-01 00:10:00,2019-01-01 00:30:00,1,2.0,4,5,10\n"
      "1,2019-01-01 02:05:00,2019-01-01 02:30:00,1,2.0,5,4,11\n"
      "1,2019-01-01 00:50:00,2019-01-01 01:30:00,1,2.0,4,4,12\n"
      "1,2019-01-01 01:00:00,2019-01-01 01:30:00,1,2.0,5,5,13\n";
  const auto unsorted = write_file(dir, "unsorted.csv", kHeader + rows);
  StreamOptions opt;
  opt.origin = 1546300800;
  auto stream = JobStream::from_file(unsorted, ColumnMapping{}, opt);
  CHECK_FALSE(stream.streamed());
  auto t0 = stream.release_due(0);
  REQUIRE(t0.size() == 2);
  CHECK(t0[0].id == 0);
  CHECK(t0[0].fare == 10);
  CHECK(t0[1].id == 1);
  CHECK(t0[1].fare == 12);
  auto t1 = stream.release_due(1);
  REQUIRE(t1.size() == 1);
  CHECK(t1[0].fare == 13);
  CHECK(t1[0].release_time == 1);
  CHECK(stream.release_due(1).empty());
  auto t2 = stream.release_due(5);
  REQUIRE(t2.size() == 1);
  CHECK(t2[0].id == 3);
  CHECK(t2[0].release_time == 2);
  CHECK(stream.exhausted());

  // A sorted file gives the same jobs without loading it.
  std::vector<TripRecord> all;
  TripReader reader(unsorted, ColumnMapping{});
  TripRecord r;
  while (reader.next(r)) all.push_back(r);
  std::stable_sort(all.begin(), all.end(), [](auto& a, auto& b) { return a.pickup_time < b.pickup_time; });
  const auto sorted_path = (dir / "sorted.csv").string();
  write_trip_csv(sorted_path, all, ColumnMapping{});
  auto sorted = JobStream::from_file(sorted_path, ColumnMapping{}, opt);
  CHECK(sorted.streamed());
  auto s = sorted.release_due(100);
  REQUIRE(s.size() == 4);
  CHECK(s[0].fare == 10);
  CHECK(s[1].fare == 12);
  CHECK(s[2].fare == 13);
  CHECK(s[3].fare == 11);
  CHECK(s[3].release_time == 2);
}

TEST_CASE("origin defaults to the earliest pickup") {
  std::vector<TripRecord> recs{fixtures::trip(1546308000, 0.5, 1, 2, 3, 4), fixtures::trip(1546304400, 0.5, 1, 2, 3, 4)};
  auto stream = JobStream::from_records(recs, StreamOptions{});
  CHECK(stream.origin() == 1546304400);
  CHECK(stream.release_due(0).size() == 1);
  CHECK(stream.release_due(1).size() == 1);
}

TEST_CASE("lifecycle edges") {
  const std::set<std::pair<JobState, JobState>> allowed{
      {JobState::Arrived, JobState::Assigned},   {JobState::Arrived, JobState::Rejected},
      {JobState::Assigned, JobState::InProgress}, {JobState::Assigned, JobState::Arrived},
      {JobState::Assigned, JobState::Failed},     {JobState::InProgress, JobState::Complete},
      {JobState::InProgress, JobState::Failed}};
  for (std::size_t a = 0; a < kJobStateCount; ++a) {
    for (std::size_t b = 0; b < kJobStateCount; ++b) {
      const auto from = static_cast<JobState>(a), to = static_cast<JobState>(b);
      CHECK(is_allowed_transition(from, to) == (allowed.count({from, to}) == 1));
    }
  }
  CHECK(is_terminal(JobState::Complete));
  CHECK(is_terminal(JobState::Rejected));
  CHECK(is_terminal(JobState::Failed));
  CHECK_FALSE(is_terminal(JobState::Assigned));
}

TEST_CASE("job table conservation and illegal edges") {
  JobTable table(true);
  for (JobId id = 0; id < 4; ++id) {
    Job j;
    j.id = id;
    j.fare = 10.0 + static_cast<double>(id);
    table.add(j, 0);
  }
  table.transition(0, JobState::Assigned, 0, 7);
  table.transition(0, JobState::InProgress, 1);
  table.transition(0, JobState::Complete, 2);
  table.transition(1, JobState::Assigned, 0, 3);
  table.transition(1, JobState::Failed, 1);
  table.transition(2, JobState::Rejected, 1);
  CHECK_THROWS_AS(table.transition(3, JobState::Complete, 1), InvariantViolation);
  CHECK_THROWS_AS(table.transition(3, JobState::InProgress, 1), InvariantViolation);
  const auto& c = table.counters();
  CHECK(c.released == 4);
  CHECK(c.completed == 1);
  CHECK(c.failed == 1);
  CHECK(c.rejected == 1);
  CHECK(table.in_flight() == 1);
  CHECK(c.released == c.completed + c.rejected + c.failed + table.in_flight());
  CHECK(c.revenue == 10.0);
  CHECK(table.audit().empty());
  CHECK(table.edge_count(JobState::Assigned, JobState::InProgress) == 1);
  CHECK(table.log().size() == 4 + 6);
}

TEST_CASE("stale jobs time out after the configured wait") {
  JobTable table;
  Job j;
  j.id = 0;
  j.release_time = 3;
  table.add(j, 3);
  CHECK(expire_stale(table, 3, 1.0, 1.0).empty());
  CHECK(expire_stale(table, 4, 1.0, 1.0) == std::vector<JobId>{0});
  CHECK(table.counters().rejected == 1);

  JobTable fine;
  j.release_time = 0;
  fine.add(j, 0);
  CHECK(expire_stale(fine, 9, 1.0, 0.1).empty());
  CHECK(expire_stale(fine, 10, 1.0, 0.1).size() == 1);
}

TEST_CASE("poisson demand is reproducible and has the requested rate") {
  PoissonSpec spec;
  spec.rate_per_hour = 20.0;
  spec.zones = {1, 2, 3};
  spec.hours = 500.0;
  const auto a = generate_poisson_trips(spec);
  const auto b = generate_poisson_trips(spec);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].pickup_time == b[i].pickup_time);
    CHECK(a[i].fare == b[i].fare);
  }
  // 10000 expected arrivals; five standard deviations is 500.
  CHECK(std::abs(static_cast<double>(a.size()) - 10000.0) < 500.0);
  for (const auto& r : a) {
    CHECK(r.dropoff_time >= r.pickup_time);
    CHECK(r.fare >= spec.base_fare);
  }
}

TEST_CASE("trip files round trip") {
  const auto dir = fixtures::temp_dir("roundtrip");
  PoissonSpec spec;
  spec.zones = {3, 4};
  spec.hours = 10;
  const auto recs = generate_poisson_trips(spec);
  const auto path = (dir / "t.csv").string();
  write_trip_csv(path, recs, ColumnMapping{});
  TripReader reader(path, ColumnMapping{});
  TripRecord r;
  std::size_t i = 0;
  while (reader.next(r)) {
    REQUIRE(i < recs.size());
    CHECK(r.pickup_time == recs[i].pickup_time);
    CHECK(r.dropoff_time == recs[i].dropoff_time);
    CHECK(r.pickup_zone == recs[i].pickup_zone);
    CHECK(r.distance_km == doctest::Approx(recs[i].distance_km).epsilon(1e-12));
    CHECK(r.fare == recs[i].fare);
    ++i;
  }
  CHECK(i == recs.size());
  ColumnMapping us;
  us.time_format = TimeFormat::UsMeridiem;
  CHECK_THROWS(write_trip_csv(path, recs, us));
}
