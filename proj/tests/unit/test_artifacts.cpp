#include <sstream>

#include "doctest.h"
#include "malbehave/artifacts.hpp"
#include "malbehave/error.hpp"
#include "oracles.hpp"

using namespace malbehave;

namespace {

constexpr const char* kGroupedLog =
    R"({"sample_id":"s1","label":"target","kind":"file","action":"created","path":"C:\\a\\x.exe","size_bytes":10}
{"sample_id":"s2","kind":"dns","record_type":"MX","qname":"mail.example"}
{"sample_id":"s1","kind":"registry","action":"key_created","key_path":"HKCU\\Software\\k","value_type":"REG_BINARY"}
{"sample_id":"s2","label":"nontarget","kind":"flow","protocol":"udp","dest_ip":"10.0.0.1","dest_port":53}

{"sample_id":"s1","label":"target","kind":"http","method":"POST","request_size_bytes":512,"response_code":200,"response_size_bytes":1024}
)";

std::size_t parse_error_line(std::string_view text) {
  try {
    parse_artifact_log(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST_SUITE("artifacts") {
  TEST_CASE("empty stream gives no runs") {
    CHECK(parse_artifact_log("").empty());
    CHECK(parse_artifact_log("\n\n  \n").empty());
  }

  TEST_CASE("single file record") {
    const auto runs = parse_artifact_log(
        R"({"sample_id":"h","kind":"file","action":"created","path":"C:\\Users\\u\\AppData\\Roaming\\xq.exe","size_bytes":40960})");
    REQUIRE(runs.size() == 1);
    REQUIRE(runs[0].file_events.size() == 1);
    const auto& ev = runs[0].file_events[0];
    CHECK(ev.extension == "exe");
    CHECK(ev.action == FileAction::Created);
    CHECK(ev.size_bytes == 40960u);
    CHECK_FALSE(runs[0].label.has_value());
  }

  TEST_CASE("records are grouped by sample in order of first appearance") {
    const auto runs = parse_artifact_log(kGroupedLog);
    REQUIRE(runs.size() == 2);
    CHECK(runs[0].sample_id == "s1");
    CHECK(runs[1].sample_id == "s2");
    CHECK(runs[0].event_count() == 3);
    CHECK(runs[1].event_count() == 2);
    CHECK(runs[0].label == Label::Target);
    CHECK(runs[1].label == Label::NonTarget);
    CHECK(runs[0].http[0].response_code == 200);
    CHECK(runs[0].registry_events[0].value_type == RegValueType::RegBinary);
  }

  TEST_CASE("group-count conservation over random logs") {
    Rng rng(11);
    std::vector<SampleRun> runs;
    std::size_t events = 0;
    for (int i = 0; i < 50; ++i) {
      runs.push_back(oracle::random_run(rng, "r" + std::to_string(i)));
      events += runs.back().event_count();
    }
    const std::string log = to_artifact_log(runs);
    std::size_t event_lines = 0;
    std::istringstream lines(log);
    for (std::string line; std::getline(lines, line);) {
      event_lines += line.find(R"("kind":"sample")") == std::string::npos ? 1 : 0;
    }
    CHECK(event_lines == events);
    const auto parsed = parse_artifact_log(log);
    std::size_t parsed_events = 0;
    for (const auto& r : parsed) parsed_events += r.event_count();
    CHECK(parsed_events == events);
    CHECK(parsed.size() == runs.size());
  }

  TEST_CASE("round trip preserves every field") {
    Rng rng(5);
    std::vector<SampleRun> runs;
    for (int i = 0; i < 40; ++i) runs.push_back(oracle::random_run(rng, "id-" + std::to_string(i)));
    runs.push_back(SampleRun{.sample_id = "quiet", .label = Label::NonTarget});
    runs.push_back(SampleRun{.sample_id = "unlabeled"});
    const auto parsed = parse_artifact_log(to_artifact_log(runs));
    CHECK(parsed == runs);
    CHECK(to_artifact_log(parsed) == to_artifact_log(runs));
  }

  TEST_CASE("parsing is deterministic") {
    CHECK(parse_artifact_log(kGroupedLog) == parse_artifact_log(kGroupedLog));
  }

  TEST_CASE("malformed lines report their line number") {
    CHECK(parse_error_line("{\"sample_id\":\"a\",\"kind\":\"dns\",\"record_type\":\"A\",\"qname\":\"x\"}\nnot json") == 2);
    CHECK(parse_error_line(R"({"sample_id":"a","kind":"dns","record_type":"AAAA","qname":"x"})") == 1);
    CHECK(parse_error_line(R"({"sample_id":"a","kind":"dns","record_type":"A","qname":"x","ttl":5})") == 1);
    CHECK(parse_error_line(R"({"sample_id":"a","kind":"flow","protocol":"tcp","dest_ip":"::1","dest_port":80})") == 1);
    CHECK(parse_error_line(R"({"sample_id":"a","kind":"flow","protocol":"tcp","dest_ip":"1.2.3","dest_port":80})") == 1);
    CHECK(parse_error_line(R"({"sample_id":"a","kind":"file","action":"created","path":"p","size_bytes":-1})") == 1);
    CHECK(parse_error_line(R"({"sample_id":"a","kind":"mutex","name":"m"})") == 1);
    CHECK(parse_error_line(R"({"kind":"dns","record_type":"A","qname":"x"})") == 1);
    CHECK(parse_error_line(R"(["sample_id"])") == 1);
  }

  TEST_CASE("conflicting labels name the sample") {
    const std::string log =
        R"({"sample_id":"dup","label":"target","kind":"dns","record_type":"A","qname":"x"}
{"sample_id":"dup","label":"nontarget","kind":"dns","record_type":"A","qname":"y"})";
    try {
      parse_artifact_log(log);
      FAIL("expected a ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
      CHECK(std::string(e.what()).find("dup") != std::string::npos);
    }
  }

  TEST_CASE("validate_run") {
    SampleRun ok;
    ok.sample_id = "ok";
    ok.file_events.push_back(make_file_event(FileAction::Created, "C:\\x.exe", 1));
    ok.flows.push_back({Protocol::Raw, "1.2.3.4", 0});
    CHECK(validate_run(ok).empty());

    SampleRun deleted = ok;
    deleted.file_events[0].action = FileAction::Deleted;
    deleted.file_events[0].size_bytes = 7;
    auto v = validate_run(deleted);
    REQUIRE(v.size() == 1);
    CHECK(v[0].find("size_bytes") != std::string::npos);
    CHECK(v[0].find("file_events[0]") != std::string::npos);

    SampleRun bad_ip = ok;
    bad_ip.flows.push_back({Protocol::Tcp, "300.1.1.1", 80});
    v = validate_run(bad_ip);
    REQUIRE(v.size() == 1);
    CHECK(v[0].rfind("flows[1].dest_ip", 0) == 0);

    SampleRun more = ok;
    more.flows[0].protocol = Protocol::Tcp;
    more.http.push_back({HttpMethod::Get, 1, 700, std::nullopt});
    more.registry_events.push_back({RegistryAction::KeyDeleted, "", RegValueType::RegSz});
    v = validate_run(more);
    CHECK(v.size() == 5);
  }

  TEST_CASE("extension_of") {
    CHECK(extension_of("C:\\dir.d\\file") == "");
    CHECK(extension_of("C:\\dir\\ARCHIVE.Tar.GZ") == "gz");
    CHECK(extension_of("/tmp/x.exe") == "exe");
    CHECK(extension_of("trailing.") == "");
  }

  TEST_CASE("label spellings") {
    CHECK(to_string(Label::Target) == "target");
    CHECK(label_from_string("nontarget") == Label::NonTarget);
    CHECK_FALSE(label_from_string("Target").has_value());
  }
}
