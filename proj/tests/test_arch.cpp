#include <catch2/catch.hpp>

#include "gnpp/arch.hpp"
#include "gnpp/network.hpp"

using namespace gnpp;

namespace {

const char* kMnistLeNet = "{C5(S1P0)@20-MP2(S2)}{C5(S1P0)@50-MP2(S2)}{FC500}{FC10}";
const char* kThreeLayerLeNet =
    "{C5(S1P2)@32-MP3(S2)}{C5(S1P2)@32-AP3(S2)}{C5(S1P2)@64-AP3(S2)}{FC10}";
const char* kAlexNet =
    "{C11(S4)@96-MP3(S2)}{C5(S1P2)@256-MP3(S2)}{C3(S1P1)@384}{C3(S1P1)@384}"
    "{C3(S1P1)@256-MP3(S2)}{FC4096-D0.5}{FC4096-D0.5}{FC1000}";

} // namespace

TEST_CASE("parse the two-conv LeNet string") {
    const auto arch = parse_arch(kMnistLeNet);
    REQUIRE(arch.layers.size() == 6);
    CHECK(std::get<ConvDesc>(arch.layers[0]) == ConvDesc{5, 1, 0, 20});
    CHECK(std::get<MaxPoolDesc>(arch.layers[1]) == MaxPoolDesc{2, 2});
    CHECK(std::get<ConvDesc>(arch.layers[2]) == ConvDesc{5, 1, 0, 50});
    CHECK(std::get<MaxPoolDesc>(arch.layers[3]) == MaxPoolDesc{2, 2});
    CHECK(std::get<FcDesc>(arch.layers[4]) == FcDesc{500});
    CHECK(std::get<FcDesc>(arch.layers[5]) == FcDesc{10});
}

TEST_CASE("parse phrase-pooling and blur tokens") {
    const auto arch = parse_arch(
        "{C5(S1P2)@32-G1(0.8)-MP3(S2)}{C5(S1P2)@32-AP3(S2)}{C5(S1P2)@64-G1(0.8)-AP3(S2)}{FC10}");
    REQUIRE(arch.layers.size() == 9);
    CHECK(std::get<GnppDesc>(arch.layers[1]) == GnppDesc{Neighborhood::Type1, 0.8});
    CHECK(std::get<GnppDesc>(arch.layers[6]) == GnppDesc{Neighborhood::Type1, 0.8});
    CHECK(std::get<AvgPoolDesc>(arch.layers[4]) == AvgPoolDesc{3, 2});
    CHECK(std::get<AvgPoolDesc>(arch.layers[7]) == AvgPoolDesc{3, 2});

    const auto blur = parse_arch("{C3(S1P1)@4-GB(0.75)-MP2(S2)}{FC2}");
    CHECK(std::get<GaussBlurDesc>(blur.layers[1]) == GaussBlurDesc{0.75});

    const auto t2 = parse_arch("{C3(S1P1)@4-G2(1.0)-MP2(S2)}{FC2}");
    CHECK(std::get<GnppDesc>(t2.layers[1]) == GnppDesc{Neighborhood::Type2, 1.0});
}

TEST_CASE("all verbatim architecture strings parse") {
    CHECK(parse_arch(kMnistLeNet).layers.size() == 6);
    CHECK(parse_arch(kThreeLayerLeNet).layers.size() == 7);
    const auto alex = parse_arch(kAlexNet);
    CHECK(alex.layers.size() == 13);
    CHECK(std::get<DropoutDesc>(alex.layers[9]) == DropoutDesc{0.5});
    // whitespace (line wrap) is ignored
    const auto wrapped = parse_arch(
        "{C11(S4)@96-MP3(S2)}{C5(S1P2)@256-MP3(S2)}{C3(S1P1)@384}{C3(S1P1)@384}\n"
        "{C3(S1P1)@256-MP3(S2)}{FC4096-D0.5}{FC4096-D0.5}{FC1000}");
    CHECK(same_layers(wrapped, alex));
}

TEST_CASE("parse errors carry byte offsets") {
    SECTION("unbalanced braces") {
        const std::string text = "{C5(S1P0)@20-MP2(S2)";
        try {
            parse_arch(text);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.offset() == text.size());
            CHECK(std::string(e.what()).find("unbalanced") != std::string::npos);
        }
    }
    SECTION("unknown token") {
        try {
            parse_arch("{X5}");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.offset() == 1);
            CHECK(std::string(e.what()).find("unknown layer token") != std::string::npos);
        }
    }
    SECTION("malformed pieces") {
        CHECK_THROWS_AS(parse_arch("{C5(S1P0)20}"), ParseError);  // missing '@'
        CHECK_THROWS_AS(parse_arch("{MP2(2)}"), ParseError);      // missing 'S'
        CHECK_THROWS_AS(parse_arch("{FC}"), ParseError);          // missing width
        CHECK_THROWS_AS(parse_arch("{D1.5}{FC2}"), ParseError);   // ratio out of range
        CHECK_THROWS_AS(parse_arch("{G1(0)}{FC2}"), ParseError);  // sigma out of range
        CHECK_THROWS_AS(parse_arch("{G3(1)}{FC2}"), ParseError);  // no such neighborhood
        CHECK_THROWS_AS(parse_arch(""), ParseError);
        CHECK_THROWS_AS(parse_arch("{C3(S1)@4-MP2(S2)}"), ParseError); // no final FC
    }
}

TEST_CASE("shape inference") {
    SECTION("two-conv LeNet chain on 28x28") {
        const auto arch = parse_arch(kMnistLeNet);
        const auto shapes = shape_infer(arch, {1, 1, 28, 28});
        REQUIRE(shapes.size() == 6);
        CHECK(shapes[0] == Shape4{1, 20, 24, 24});
        CHECK(shapes[1] == Shape4{1, 20, 12, 12});
        CHECK(shapes[2] == Shape4{1, 50, 8, 8});
        CHECK(shapes[3] == Shape4{1, 50, 4, 4});
        CHECK(shapes[4] == Shape4{1, 500, 1, 1});
        CHECK(shapes[5] == Shape4{1, 10, 1, 1});
    }
    SECTION("conv5 of the eight-layer string is 256x13x13") {
        const auto arch = parse_arch(kAlexNet);
        const auto shapes = shape_infer(arch, {1, 3, 227, 227});
        CHECK(shapes[6] == Shape4{1, 256, 13, 13});
        CHECK(shapes[7] == Shape4{1, 256, 6, 6});
    }
    SECTION("phrase pooling is a shape identity anywhere") {
        const auto plain = parse_arch(kThreeLayerLeNet);
        const auto withg = with_gnpp(plain, {0, 1, 2}, Neighborhood::Type2, 0.9);
        const auto s0 = shape_infer(plain, {1, 3, 32, 32});
        const auto s1 = shape_infer(withg, {1, 3, 32, 32});
        REQUIRE(s1.size() == s0.size() + 3);
        // same final chain, and each inserted layer preserves its input shape
        CHECK(s1.back() == s0.back());
        const auto pools = pool_layer_indices(withg);
        for (auto pi : pools) CHECK(s1[pi - 1] == s1[pi - 2]);
    }
    SECTION("broken chain reports the layer") {
        const auto arch = parse_arch("{C5(S1P0)@4-MP2(S2)}{C5(S1P0)@4}{FC2}");
        CHECK_THROWS_WITH(shape_infer(arch, {1, 1, 8, 8}),
                          Catch::Contains("layer 2") && Catch::Contains("< 1"));
    }
}

TEST_CASE("parameter counting") {
    const auto arch = parse_arch(kMnistLeNet);
    // 20*(5*5*1)+20 + 50*(5*5*20)+50 + 500*800+500 + 10*500+10
    CHECK(param_count(arch, {1, 1, 28, 28}) == 431080);

    const auto withg = with_gnpp(arch, {0, 1}, Neighborhood::Type1, 1.0);
    CHECK(param_count(withg, {1, 1, 28, 28}) == 431080);

    const auto blur = parse_arch("{C5(S1P0)@20-GB(0.8)-MP2(S2)}{C5(S1P0)@50-MP2(S2)}{FC500}{FC10}");
    CHECK(param_count(blur, {1, 1, 28, 28}) == 431080);
}

TEST_CASE("render and reparse round trip") {
    for (const char* text :
         {kMnistLeNet, kThreeLayerLeNet, kAlexNet,
          "{C5(S1P2)@32-G1(0.8)-MP3(S2)}{C5(S1P2)@32-G2(1)-AP3(S2)}{GB(0.5)}{FC10}",
          "{C3(S1)@4-MP2(S2)-D0.25}{FC10}"}) {
        const auto arch = parse_arch(text);
        const auto again = parse_arch(render_arch(arch));
        CHECK(same_layers(arch, again));
    }
}

TEST_CASE("with_gnpp insertion") {
    const auto arch = parse_arch(kThreeLayerLeNet);
    REQUIRE(pool_layer_indices(arch).size() == 3);

    const auto g13 = with_gnpp(arch, {0, 2}, Neighborhood::Type1, 0.8);
    REQUIRE(g13.layers.size() == 9);
    CHECK(std::get<GnppDesc>(g13.layers[1]) == GnppDesc{Neighborhood::Type1, 0.8});
    CHECK(std::get<GnppDesc>(g13.layers[6]) == GnppDesc{Neighborhood::Type1, 0.8});
    CHECK(std::holds_alternative<MaxPoolDesc>(g13.layers[2]));
    CHECK(std::holds_alternative<AvgPoolDesc>(g13.layers[7]));
    CHECK_NOTHROW(validate_gnpp_placement(g13));

    CHECK_THROWS_AS(with_gnpp(arch, {3}, Neighborhood::Type1, 1.0), std::invalid_argument);
}

TEST_CASE("network building") {
    SECTION("same seed, identical parameters; different seed differs") {
        const auto arch = parse_arch(kMnistLeNet);
        auto a = build_network<float>(arch, {2, 1, 28, 28}, 7);
        auto b = build_network<float>(arch, {2, 1, 28, 28}, 7);
        auto c = build_network<float>(arch, {2, 1, 28, 28}, 8);
        const auto pa = a.params(), pb = b.params(), pc = c.params();
        REQUIRE(pa.size() == pb.size());
        bool any_diff_seed8 = false;
        for (std::size_t t = 0; t < pa.size(); ++t) {
            REQUIRE(*pa[t].value == *pb[t].value);
            if (*pa[t].value != *pc[t].value) any_diff_seed8 = true;
        }
        CHECK(any_diff_seed8);
        CHECK(a.parameter_count() == 431080);
    }
    SECTION("phrase pooling adds no parameters") {
        const auto arch = parse_arch(kMnistLeNet);
        const auto withg = with_gnpp(arch, {0, 1}, Neighborhood::Type2, 0.9);
        auto net = build_network<float>(withg, {2, 1, 28, 28}, 7);
        CHECK(net.parameter_count() == 431080);
    }
    SECTION("strict placement") {
        const auto bad = parse_arch("{C3(S1P1)@2-MP2(S2)}{FC4}{G1(1.0)}{FC2}");
        CHECK_THROWS_WITH(build_network<float>(bad, {1, 1, 8, 8}, 1),
                          Catch::Contains("layer 3") && Catch::Contains("placement"));
        CHECK_NOTHROW(build_network<float>(bad, {1, 1, 8, 8}, 1, /*strict_placement=*/false));
    }
    SECTION("forward produces the inferred logits shape") {
        const auto arch = parse_arch("{C3(S1P1)@4-G1(0.8)-MP2(S2)}{FC8}{FC3}");
        auto net = build_network<float>(arch, {2, 1, 8, 8}, 3);
        Rng rng(5);
        Tensor4<float> x(2, 1, 8, 8, 0.5f);
        const auto logits = net.forward(x, false, rng);
        CHECK(logits.shape() == Shape4{2, 3, 1, 1});
        CHECK(net.class_count() == 3);
    }
    SECTION("every activation matches the inferred chain") {
        // pooling after phrase pooling is the composition the builder must
        // predict exactly
        const auto arch = parse_arch(
            "{C5(S1P2)@6-G2(0.8)-MP3(S2)}{C3(S1P1)@4-GB(0.7)-AP2(S2)-D0.1}{FC12}{FC5}");
        const Shape4 in{3, 2, 17, 17};
        const auto inferred = shape_infer(arch, in);
        auto net = build_network<float>(arch, in, 19);
        Rng rng(2);
        Tensor4<float> x(in, 0.25f);
        const auto acts = net.forward_collect(x, rng);
        REQUIRE(net.arch_output_layer.size() == arch.layers.size());
        for (std::size_t li = 0; li < arch.layers.size(); ++li)
            CHECK(acts[net.arch_output_layer[li] + 1].shape() == inferred[li]);
    }
}
