#include <doctest.h>

#include <thread>

#include "lbhx/error.hpp"
#include "lbhx/init.hpp"
#include "lbhx/lattice_model.hpp"
#include "lbhx/simulation.hpp"

using namespace lbhx;

namespace {

SimulationConfig small_config() {
  SimulationConfig c;
  c.lx = 96;
  c.ly = 64;
  c.model = "d2q9";
  c.family = Family::SoA;
  c.vl = 1;
  c.iterations = 20;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("decompose_x") {
  auto w = [](int lx, int n) {
    std::vector<int> out;
    for (const auto& r : decompose_x(lx, n, 3)) out.push_back(r.width());
    return out;
  };
  CHECK(w(100, 4) == std::vector<int>{25, 25, 25, 25});
  CHECK(w(102, 4) == std::vector<int>{26, 26, 25, 25});
  const auto one = decompose_x(100, 1, 3);
  REQUIRE(one.size() == 1);
  CHECK(one[0].x_begin == 0);
  CHECK(one[0].x_end == 100);
  CHECK(one[0].left == 0);
  CHECK(one[0].right == 0);
  const auto four = decompose_x(102, 4, 3);
  CHECK(four[0].left == 3);
  CHECK(four[3].right == 0);
  CHECK(four[2].x_begin == 52);
  CHECK_THROWS_AS(decompose_x(20, 4, 3), ConfigError);
  CHECK_THROWS_AS(decompose_x(20, 0, 3), ConfigError);
}

TEST_CASE("frames round-trip and corruption is detected") {
  const Bytes payload = to_bytes(std::vector<double>{1.5, -2.0});
  const Bytes wire = encode_frame(7, payload);
  CHECK(wire.size() == kFrameHeader + 16);
  const auto f = decode_frame(wire, 1);
  CHECK(f.tag == 7);
  CHECK(f.payload == payload);
  Bytes bad = wire;
  bad[4] = std::byte{99};
  CHECK_THROWS_AS(decode_frame(bad, 1), CommError);
  CHECK_THROWS_AS(decode_frame(std::span<const std::byte>(wire.data(), 5), 1), CommError);
}

TEST_CASE("in-memory transport delivers in order per tag") {
  auto g = InMemoryHub::make_group(2);
  for (int i = 0; i < 3; ++i) g[0]->send(1, 5, to_bytes(std::vector<double>{double(i)}));
  g[0]->send(1, 6, {});
  CHECK(g[1]->recv(0, 6, 1.0).empty());
  for (int i = 0; i < 3; ++i) CHECK(to_doubles(g[1]->recv(0, 5, 1.0)).at(0) == i);
  CHECK(g[0]->bytes_sent(1) == 24);
  CHECK(g[1]->bytes_received(0) == 24);
  CHECK_THROWS_AS(g[1]->recv(0, 5, 0.01), CommError);
}

TEST_CASE("tcp transport exchanges messages") {
  auto g = TcpTransport::make_local_group(3, 10.0);
  g[2]->send(0, 9, to_bytes(std::vector<double>{3.0, 4.0}));
  g[0]->send(0, 9, to_bytes(std::vector<double>{1.0}));
  CHECK(to_doubles(g[0]->recv(2, 9, 5.0)) == std::vector<double>{3.0, 4.0});
  CHECK(to_doubles(g[0]->recv(0, 9, 5.0)) == std::vector<double>{1.0});
  try {
    g[1]->recv(2, 9, 0.05);
    FAIL("expected timeout");
  } catch (const CommError& e) {
    CHECK(std::string(e.what()).find("rank 2") != std::string::npos);
  }
}

TEST_CASE("endpoint parsing") {
  const auto e = parse_endpoints("127.0.0.1:5000,localhost:6001");
  REQUIRE(e.size() == 2);
  CHECK(e[1].host == "localhost");
  CHECK(e[1].port == 6001);
  CHECK_THROWS_AS(parse_endpoints("nohost"), ConfigError);
  CHECK_THROWS_AS(parse_endpoints("a:99999"), ConfigError);
}

TEST_CASE("two-rank exchange fills each halo with the peer's edge") {
  const auto m = builtin_model("d2q9");
  auto g = InMemoryHub::make_group(2);
  const auto lays = decompose_x(16, 2, 1);
  std::vector<FieldBuffer> bufs;
  for (int r = 0; r < 2; ++r) {
    bufs.emplace_back(LayoutDescriptor{Family::AoS}, Geometry{8, 8, 1}, 9);
    initialize(bufs[r], m, {InitKind::Random, 2, 0.05}, lays[r].x_begin, 16);
  }
  std::vector<std::thread> th;
  for (int r = 0; r < 2; ++r) {
    th.emplace_back([&, r] { RankHaloExchanger(*g[r], lays[r], 5.0).exchange(bufs[r]); });
  }
  for (auto& t : th) t.join();
  for (int p = 0; p < 9; ++p) {
    for (int y = 0; y < 8; ++y) {
      CHECK(bufs[0].at(Role::Prv, p, 0, y) == bufs[1].at(Role::Prv, p, 8, y));
      CHECK(bufs[0].at(Role::Prv, p, 9, y) == bufs[1].at(Role::Prv, p, 1, y));
      CHECK(bufs[1].at(Role::Prv, p, 0, y) == bufs[0].at(Role::Prv, p, 8, y));
      CHECK(bufs[1].at(Role::Prv, p, 9, y) == bufs[0].at(Role::Prv, p, 1, y));
    }
  }
}

TEST_CASE("single-rank exchange equals the periodic wrap") {
  const auto m = builtin_model("d2q37");
  auto g = InMemoryHub::make_group(1);
  FieldBuffer a(LayoutDescriptor{Family::CSoA, 4}, Geometry{8, 8, 3}, 37);
  initialize(a, m, {InitKind::Random, 2, 0.05});
  FieldBuffer b = a;
  RankHaloExchanger(*g[0], decompose_x(8, 1, 3)[0]).exchange(a);
  fill_periodic_halos(b);
  CHECK(std::equal(a.prv(), a.prv() + a.index().size(), b.prv()));
}

TEST_CASE("corrupted halo frame applies nothing") {
  const auto m = builtin_model("d2q9");
  auto hub = std::make_shared<InMemoryHub>(2);
  InMemoryTransport t1(hub, 1);
  const auto lays = decompose_x(16, 2, 1);
  FieldBuffer buf(LayoutDescriptor{Family::SoA}, Geometry{8, 8, 1}, 9);
  initialize(buf, m, {InitKind::Random, 2, 0.05});
  const FieldBuffer before = buf;
  // left-halo message with a lying length, then a valid right-halo message
  Bytes bad = encode_frame(kTagRightGoing, to_bytes(std::vector<double>(72, 1.0)));
  bad[4] = std::byte{0x10};
  hub->inject_raw(0, 1, bad);
  hub->inject_raw(0, 1, encode_frame(kTagLeftGoing, to_bytes(std::vector<double>(72, 1.0))));
  CHECK_THROWS_AS(RankHaloExchanger(t1, lays[1], 1.0).exchange(buf), CommError);
  CHECK(std::equal(buf.prv(), buf.prv() + buf.index().size(), before.prv()));

  // right size framing but wrong payload size
  hub->inject_raw(0, 1, encode_frame(kTagRightGoing, to_bytes(std::vector<double>(71, 1.0))));
  hub->inject_raw(0, 1, encode_frame(kTagLeftGoing, to_bytes(std::vector<double>(72, 1.0))));
  CHECK_THROWS_AS(RankHaloExchanger(t1, lays[1], 1.0).exchange(buf), CommError);
  CHECK(std::equal(buf.prv(), buf.prv() + buf.index().size(), before.prv()));
}

TEST_CASE("ranked runs reproduce the single-rank run") {
  auto c = small_config();
  const auto one = run_distributed(c, 1, TransportKind::InMemory);
  c.m = 5;
  const auto four = run_distributed(c, 4, TransportKind::InMemory);
  c.m = 2;
  const auto tcp = run_distributed(c, 4, TransportKind::Tcp);
  CHECK(one.final_state.values.size() == 9u * 96 * 64);
  CHECK(four.final_state.values == one.final_state.values);
  CHECK(tcp.final_state.values == one.final_state.values);
  for (const auto& r : four.ranks) {
    CHECK(r.bytes_to_left == 20u * 3 * 64 * 9 * 8);
    CHECK(r.bytes_to_right == 20u * 3 * 64 * 9 * 8);
  }
  CHECK(four.mlups > 0.0);
  CHECK(four.t_exe.size() == 4);
}

TEST_CASE("zero iterations dumps the initial state") {
  auto c = small_config();
  c.iterations = 0;
  c.dump_every = 1;
  c.dump_prefix = "test_zero_iter";
  const auto r = run_simulation(c);
  REQUIRE(r.dumps.size() == 1);
  const auto d = read_dump_file(r.dumps[0]);
  const auto m = builtin_model("d2q9");
  FieldBuffer buf(c.layout(), {c.lx, c.ly, 1}, 9);
  initialize(buf, m, {InitKind::Random, c.seed, 0.05});
  CHECK(d.values == to_canonical(buf).values);
  CHECK(r.report.rows.empty());
  std::remove(r.dumps[0].c_str());
}

TEST_CASE("border width does not change the physics") {
  auto c = small_config();
  c.lx = 48;
  c.iterations = 10;
  c.m = 8;
  const auto a = run_simulation(c);
  c.m = 0;
  const auto b = run_simulation(c);
  CHECK(a.final_state.values == b.final_state.values);
}

TEST_CASE("fixed M with autotune is rejected") {
  auto c = small_config();
  c.m = 3;
  c.autotune = true;
  CHECK_THROWS_AS(run_simulation(c), ConfigError);
}
