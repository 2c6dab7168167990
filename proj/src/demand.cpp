#include "evfleet/demand.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string_view>

namespace evfleet::demand {

namespace {

std::size_t state_index(JobState s) { return static_cast<std::size_t>(s); }

std::optional<double> parse_double(std::string_view s) {
  // Trim surrounding blanks; from_chars does not skip them.
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::int64_t to_epoch(int y, unsigned mo, unsigned d, int h, int mi, int s) {
  using namespace std::chrono;
  const sys_days day = year_month_day{year{y}, month{mo}, std::chrono::day{d}};
  return day.time_since_epoch().count() * 86400LL + h * 3600LL + mi * 60LL + s;
}

bool valid_clock(int h, int mi, int s) {
  return h >= 0 && h < 24 && mi >= 0 && mi < 60 && s >= 0 && s < 61;
}

}  // namespace

const char* to_string(JobState state) {
  switch (state) {
    case JobState::Arrived: return "ARRIVED";
    case JobState::Assigned: return "ASSIGNED";
    case JobState::InProgress: return "IN_PROGRESS";
    case JobState::Complete: return "COMPLETE";
    case JobState::Rejected: return "REJECTED";
    case JobState::Failed: return "FAILED";
  }
  return "?";
}

bool is_allowed_transition(JobState from, JobState to) {
  switch (from) {
    case JobState::Arrived:
      return to == JobState::Assigned || to == JobState::Rejected;
    case JobState::Assigned:
      return to == JobState::InProgress || to == JobState::Arrived || to == JobState::Failed;
    case JobState::InProgress:
      return to == JobState::Complete || to == JobState::Failed;
    default:
      return false;
  }
}

bool is_terminal(JobState state) {
  return state == JobState::Complete || state == JobState::Rejected || state == JobState::Failed;
}

// ---------------------------------------------------------------------------
// Parsing

std::optional<std::int64_t> parse_time(const std::string& text, TimeFormat format) {
  std::string_view s = text;
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  int y = 0, h = 0, mi = 0, sec = 0;
  unsigned mo = 0, d = 0;
  switch (format) {
    case TimeFormat::UnixSeconds: {
      auto v = parse_double(s);
      if (!v) return std::nullopt;
      return static_cast<std::int64_t>(std::floor(*v));
    }
    case TimeFormat::Iso: {
      char sep = 0;
      const std::string str(s);
      if (std::sscanf(str.c_str(), "%d-%u-%u%c%d:%d:%d", &y, &mo, &d, &sep, &h, &mi, &sec) != 7) {
        return std::nullopt;
      }
      if (sep != ' ' && sep != 'T') return std::nullopt;
      break;
    }
    case TimeFormat::UsMeridiem: {
      char ampm[3] = {0, 0, 0};
      const std::string str(s);
      if (std::sscanf(str.c_str(), "%u/%u/%d %d:%d:%d %2s", &mo, &d, &y, &h, &mi, &sec, ampm) != 7) {
        return std::nullopt;
      }
      if (h < 1 || h > 12) return std::nullopt;
      const std::string m(ampm);
      if (m == "AM" || m == "am") {
        if (h == 12) h = 0;
      } else if (m == "PM" || m == "pm") {
        if (h != 12) h += 12;
      } else {
        return std::nullopt;
      }
      break;
    }
  }
  using namespace std::chrono;
  if (!year_month_day{year{y}, month{mo}, day{d}}.ok() || !valid_clock(h, mi, sec)) return std::nullopt;
  return to_epoch(y, mo, d, h, mi, sec);
}

std::string format_iso_time(std::int64_t seconds) {
  using namespace std::chrono;
  std::int64_t days = seconds / 86400;
  std::int64_t rem = seconds % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u %02d:%02d:%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(rem / 3600), static_cast<int>((rem % 3600) / 60),
                static_cast<int>(rem % 60));
  return buf;
}

std::vector<std::string> split_delimited(const std::string& line, char delimiter) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delimiter) {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r' && c != '\n') {
      field.push_back(c);
    }
  }
  out.push_back(std::move(field));
  return out;
}

// ---------------------------------------------------------------------------
// TripReader

TripReader::TripReader(const std::string& path, ColumnMapping mapping,
                       std::optional<std::set<ZoneId>> zone_filter)
    : path_(path), mapping_(std::move(mapping)), zone_filter_(std::move(zone_filter)), in_(path) {
  if (!in_) throw IngestError("cannot open trip file '" + path + "'");
  std::string header;
  if (!std::getline(in_, header)) throw IngestError("trip file '" + path + "' is empty");
  if (header.size() >= 3 && header.compare(0, 3, "\xEF\xBB\xBF") == 0) header.erase(0, 3);
  const auto names = split_delimited(header, mapping_.delimiter);
  width_ = names.size();
  const std::array<const std::string*, 6> wanted{&mapping_.pickup_time, &mapping_.dropoff_time,
                                                 &mapping_.pickup_zone, &mapping_.dropoff_zone,
                                                 &mapping_.distance, &mapping_.fare};
  for (std::size_t k = 0; k < wanted.size(); ++k) {
    auto it = std::find(names.begin(), names.end(), *wanted[k]);
    if (it == names.end()) {
      throw IngestError("trip file '" + path + "' (line 1): unknown column '" + *wanted[k] + "'");
    }
    columns_[k] = static_cast<std::size_t>(it - names.begin());
  }
}

bool TripReader::next(TripRecord& out) {
  std::string line;
  while (std::getline(in_, line)) {
    if (line.empty() || line == "\r") continue;
    ++rows_;
    const auto fields = split_delimited(line, mapping_.delimiter);
    if (fields.size() < width_) {
      ++malformed_;
      continue;
    }
    const auto pu = parse_time(fields[columns_[0]], mapping_.time_format);
    const auto dof = parse_time(fields[columns_[1]], mapping_.time_format);
    const auto puz = parse_double(fields[columns_[2]]);
    const auto doz = parse_double(fields[columns_[3]]);
    const auto dist = parse_double(fields[columns_[4]]);
    const auto fare = parse_double(fields[columns_[5]]);
    if (!pu || !dof || !puz || !doz || !dist || !fare || *dof < *pu || *fare < 0.0 || *dist < 0.0 ||
        *puz != std::floor(*puz) || *doz != std::floor(*doz) || std::abs(*puz) > 2e9 || std::abs(*doz) > 2e9) {
      ++malformed_;
      continue;
    }
    TripRecord r;
    r.pickup_time = *pu;
    r.dropoff_time = *dof;
    r.pickup_zone = static_cast<ZoneId>(*puz);
    r.dropoff_zone = static_cast<ZoneId>(*doz);
    r.distance_km = *dist * mapping_.distance_scale;
    r.fare = *fare;
    if (zone_filter_ && (!zone_filter_->count(r.pickup_zone) || !zone_filter_->count(r.dropoff_zone))) {
      ++filtered_;
      continue;
    }
    out = r;
    return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// JobStream

JobStream JobStream::from_file(const std::string& path, const ColumnMapping& mapping,
                               const StreamOptions& options) {
  // First pass: check ordering and find the earliest pickup.
  bool sorted = true;
  std::optional<std::int64_t> earliest;
  {
    TripReader scan(path, mapping, options.zone_filter);
    TripRecord r;
    std::int64_t last = 0;
    bool first = true;
    while (scan.next(r)) {
      if (!first && r.pickup_time < last) sorted = false;
      last = r.pickup_time;
      first = false;
      if (!earliest || r.pickup_time < *earliest) earliest = r.pickup_time;
    }
  }
  if (!sorted) {
    TripReader reader(path, mapping, options.zone_filter);
    std::vector<TripRecord> records;
    TripRecord r;
    while (reader.next(r)) records.push_back(r);
    JobStream s = from_records(std::move(records), options);
    s.preload_malformed_ = reader.malformed();
    return s;
  }
  JobStream s;
  s.tick_hours_ = options.tick_hours;
  s.origin_ = options.origin.value_or(earliest.value_or(0));
  s.reader_ = std::make_unique<TripReader>(path, mapping, options.zone_filter);
  return s;
}

JobStream JobStream::from_records(std::vector<TripRecord> records, const StreamOptions& options) {
  JobStream s;
  s.tick_hours_ = options.tick_hours;
  if (options.zone_filter) {
    std::erase_if(records, [&](const TripRecord& r) {
      return !options.zone_filter->count(r.pickup_zone) || !options.zone_filter->count(r.dropoff_zone);
    });
  }
  std::stable_sort(records.begin(), records.end(),
                   [](const TripRecord& a, const TripRecord& b) { return a.pickup_time < b.pickup_time; });
  s.origin_ = options.origin.value_or(records.empty() ? 0 : records.front().pickup_time);
  s.records_ = std::move(records);
  return s;
}

Tick JobStream::release_tick(std::int64_t pickup_time) const {
  const double hours = static_cast<double>(pickup_time - origin_) / 3600.0;
  return static_cast<Tick>(std::floor(hours / tick_hours_));
}

bool JobStream::peek() {
  if (reader_) {
    while (!lookahead_ && !reader_done_) {
      TripRecord r;
      if (!reader_->next(r)) {
        reader_done_ = true;
        break;
      }
      if (r.pickup_time < origin_) {
        ++before_origin_;
        continue;
      }
      lookahead_ = r;
    }
    return lookahead_.has_value();
  }
  while (cursor_ < records_.size() && records_[cursor_].pickup_time < origin_) {
    ++before_origin_;
    ++cursor_;
  }
  return cursor_ < records_.size();
}

Job JobStream::make_job(const TripRecord& record) {
  Job job;
  job.id = next_id_++;
  job.release_time = release_tick(record.pickup_time);
  job.pickup_zone = record.pickup_zone;
  job.dropoff_zone = record.dropoff_zone;
  job.fare = record.fare;
  job.service_duration_h = record.duration_hours();
  job.service_distance_km = record.distance_km;
  return job;
}

std::vector<Job> JobStream::release_due(Tick now) {
  std::vector<Job> out;
  while (peek()) {
    const TripRecord& r = reader_ ? *lookahead_ : records_[cursor_];
    if (release_tick(r.pickup_time) > now) break;
    out.push_back(make_job(r));
    if (reader_) {
      lookahead_.reset();
    } else {
      ++cursor_;
    }
  }
  return out;
}

bool JobStream::exhausted() const {
  if (reader_) return reader_done_ && !lookahead_;
  return cursor_ >= records_.size();
}

std::size_t JobStream::malformed() const {
  return reader_ ? reader_->malformed() : preload_malformed_;
}

// ---------------------------------------------------------------------------
// JobTable

void JobTable::add(Job job, Tick now) {
  job.state = JobState::Arrived;
  job.assigned_vehicle.reset();
  if (open_.count(job.id)) throw InvariantViolation("job " + std::to_string(job.id) + " released twice");
  ++counters_.released;
  if (keep_log_) log_.push_back({job.id, JobState::Arrived, JobState::Arrived, now});
  open_.emplace(job.id, std::move(job));
}

const Job& JobTable::at(JobId id) const {
  auto it = open_.find(id);
  if (it == open_.end()) throw std::out_of_range("job " + std::to_string(id) + " is not open");
  return it->second;
}

void JobTable::transition(JobId id, JobState to, Tick now, std::optional<VehicleId> vehicle) {
  auto it = open_.find(id);
  if (it == open_.end()) throw InvariantViolation("transition on unknown job " + std::to_string(id));
  Job& job = it->second;
  const JobState from = job.state;
  if (!is_allowed_transition(from, to)) {
    throw InvariantViolation("job " + std::to_string(id) + ": illegal transition " + to_string(from) +
                             " -> " + to_string(to));
  }
  ++edges_[state_index(from) * kJobStateCount + state_index(to)];
  if (keep_log_) log_.push_back({id, from, to, now});
  job.state = to;
  if (to == JobState::Assigned) {
    if (!vehicle) throw InvariantViolation("job " + std::to_string(id) + " assigned without a vehicle");
    job.assigned_vehicle = vehicle;
  } else if (to != JobState::InProgress) {
    job.assigned_vehicle.reset();
  }
  switch (to) {
    case JobState::Complete:
      ++counters_.completed;
      counters_.revenue += job.fare;
      break;
    case JobState::Rejected: ++counters_.rejected; break;
    case JobState::Failed: ++counters_.failed; break;
    default: break;
  }
  if (is_terminal(to)) open_.erase(it);
}

std::size_t JobTable::edge_count(JobState from, JobState to) const {
  return edges_[state_index(from) * kJobStateCount + state_index(to)];
}

std::string JobTable::audit() const {
  const auto& c = counters_;
  if (c.released != c.completed + c.rejected + c.failed + open_.size()) {
    return "job conservation broken: released " + std::to_string(c.released) + " != complete " +
           std::to_string(c.completed) + " + rejected " + std::to_string(c.rejected) + " + failed " +
           std::to_string(c.failed) + " + open " + std::to_string(open_.size());
  }
  for (std::size_t f = 0; f < kJobStateCount; ++f) {
    for (std::size_t t = 0; t < kJobStateCount; ++t) {
      const auto from = static_cast<JobState>(f);
      const auto to = static_cast<JobState>(t);
      if (edges_[f * kJobStateCount + t] && !is_allowed_transition(from, to)) {
        return std::string("illegal job edge recorded: ") + to_string(from) + " -> " + to_string(to);
      }
    }
  }
  for (const auto& [id, job] : open_) {
    const bool assigned = job.state == JobState::Assigned || job.state == JobState::InProgress;
    if (assigned != job.assigned_vehicle.has_value()) {
      return "job " + std::to_string(id) + " vehicle link inconsistent with state " + to_string(job.state);
    }
  }
  return {};
}

std::vector<JobId> expire_stale(JobTable& jobs, Tick now, double timeout_hours, double tick_hours) {
  if (!(timeout_hours > 0.0)) throw std::invalid_argument("job timeout must be positive");
  std::vector<JobId> stale;
  for (const auto& [id, job] : jobs.open()) {
    if (job.state != JobState::Arrived) continue;
    const double waited = static_cast<double>(now - job.release_time) * tick_hours;
    // Guard against 0.1 * 10 style rounding at the boundary.
    if (waited >= timeout_hours - 1e-9) stale.push_back(id);
  }
  for (JobId id : stale) jobs.transition(id, JobState::Rejected, now);
  return stale;
}

// ---------------------------------------------------------------------------
// Synthetic demand

std::vector<TripRecord> generate_poisson_trips(const PoissonSpec& spec) {
  if (spec.zones.empty()) throw std::invalid_argument("poisson demand needs at least one zone");
  if (!(spec.rate_per_hour > 0.0)) throw std::invalid_argument("poisson rate must be positive");
  Rng rng(spec.seed);
  std::exponential_distribution<double> gap(spec.rate_per_hour);
  std::uniform_int_distribution<std::size_t> zone(0, spec.zones.size() - 1);
  std::uniform_real_distribution<double> jitter(0.5, 2.0);
  std::uniform_real_distribution<double> pace(0.8, 1.25);

  std::vector<TripRecord> out;
  double t = gap(rng);
  while (t < spec.hours) {
    const std::size_t a = zone(rng);
    const std::size_t b = zone(rng);
    const double span = std::abs(static_cast<double>(a) - static_cast<double>(b));
    TripRecord r;
    r.pickup_zone = spec.zones[a];
    r.dropoff_zone = spec.zones[b];
    r.distance_km = span * spec.zone_spacing_km + jitter(rng);
    const double duration_h = r.distance_km / spec.speed_kmh * pace(rng);
    r.pickup_time = spec.start_time + static_cast<std::int64_t>(t * 3600.0);
    r.dropoff_time = r.pickup_time + std::max<std::int64_t>(1, static_cast<std::int64_t>(duration_h * 3600.0));
    r.fare = spec.base_fare + spec.fare_per_km * r.distance_km;
    out.push_back(r);
    t += gap(rng);
  }
  return out;
}

void write_trip_csv(const std::string& path, const std::vector<TripRecord>& records,
                    const ColumnMapping& mapping) {
  std::ofstream out(path);
  if (!out) throw IngestError("cannot write trip file '" + path + "'");
  if (mapping.time_format == TimeFormat::UsMeridiem) {
    throw std::invalid_argument("writing 12-hour timestamps is not supported");
  }
  const char d = mapping.delimiter;
  out << mapping.pickup_time << d << mapping.dropoff_time << d << mapping.pickup_zone << d
      << mapping.dropoff_zone << d << mapping.distance << d << mapping.fare << '\n';
  auto stamp = [&](std::int64_t t) {
    return mapping.time_format == TimeFormat::UnixSeconds ? std::to_string(t) : format_iso_time(t);
  };
  char buf[64];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof(buf), "%.17g", r.distance_km / mapping.distance_scale);
    out << stamp(r.pickup_time) << d << stamp(r.dropoff_time) << d << r.pickup_zone << d << r.dropoff_zone
        << d << buf << d;
    std::snprintf(buf, sizeof(buf), "%.17g", r.fare);
    out << buf << '\n';
  }
}

}  // namespace evfleet::demand
