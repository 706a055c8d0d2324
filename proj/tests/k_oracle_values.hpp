#pragma once

// Generated by tests/oracles/k_oracle.py with 50-digit arithmetic.

struct KOracleCase {
  double p, tau, T, L1, L2, L3;
  double k1, k2, k3, k4;
};

inline constexpr KOracleCase kKOracle[] = {
    {0.99, 1e-6, 0.7994283, 1.118034, 0.565, 0.5, 4.1826369480291014483, 9.102337005577407176, 0.0077201462556707733487, 0.027246788721930099096},
    {0.99, 2.93e-6, 0.7994283, 1.118034, 0.565, 0.5, 4.1826553933259145261, 9.1023970944585470436, 0.013144000481988805546, 0.046389491951978951815},
    {0.5, 0.01, 2, 0.3, 0.2, 0.7, 2.119568611238849481, 3.3228813850959171507, 1.0439117842595552061, 1.9432740213139842149},
    {1, 0.1, 1, 1, 1, 1, 16.406130728805083696, 61.56125930248865018, 18.415836068943746374, 523.67226505904332249},
    {1.5, 0.05, 0.5, 2, 0.5, 1.5, 20.639725128913316074, 116.86998217624268006, 26.306040183831159857, 244.3093967768472407},
    {2, 0.1, 1, 1, 1, 1, 269.16112549064242671, 8419.3600053472951074, 339.14301811820945765, 274232.64119206892584},
    {2, 0.001, 3, 0.5, 0.25, 2, 14746251.905140332435, 3057215082.7843663124, 707833.91605789702596, 16565874936313.596014},
    {3, 0.2, 0.7, 0.4, 0.6, 0.8, 100.516466192915388, 24587.338135464421581, 1336.7373626098402889, 178046.66904277149329},
    {4, 0.05, 1.2, 1.1, 0.3, 0.9, 500713.90255480115291, 11960548609.079887785, 7974117.4694655307746, 4392335848122.3935927},
    {6.5, 0.3, 0.1, 0.2, 0.1, 0.4, 8.9027860267649844243, 980672.12344452666929, 77653.201519289603917, 26506.154571359762392},
};

struct CpOracleCase {
  double p, value;
};

inline constexpr CpOracleCase kCpOracle[] = {
    {2, 4.0},
    {2.5, 10.827518454840302626},
    {3, 32.217552717812071581},
    {4, 359.59396433470507545},
    {7, 1853377.4621722949251},
};

struct HorizonOracleCase {
  double p, M, gamma, epsilon, T;
};

inline constexpr HorizonOracleCase kHorizonOracle[] = {
    {0.99, 1.127816, 0.2278604, 0.94, 0.79942992692443278468},
    {4, 2, 1, 0.5, 5.5451774444795624753},
    {2.5, 1.3, 0.4, 0.2, 9.8781092964535683872},
};
