/// Long-run unavailability over recovery times 12..=72 hours; rows are bone nodes, columns sensor nodes.
pub const RECOVERY_GRID: [[f64; 6]; 6] = [
    [
        8.333333217179349E-4,
        0.00133333333202155153,
        0.00183333333177097684,
        0.00233333333141991653,
        0.00283333333096821674,
        0.00333333333041573217,
    ],
    [
        0.0011666666216913243,
        0.0016666666201878974,
        0.0021666666176807944,
        0.0026666666141685357,
        0.003166666609649534,
        0.003666666604122396,
    ],
    [
        0.001499999899397662,
        0.0019999998978929077,
        0.002499999895384126,
        0.0029999998918698125,
        0.0034999998873484696,
        0.003999999881818639,
    ],
    [
        0.001833333154814647,
        0.002333333153308199,
        0.0028333331507974266,
        0.003333333147280786,
        0.0038333331427567864,
        0.004333333137223828,
    ],
    [
        0.0021666663879199386,
        0.0026666663864114977,
        0.0031666663838983643,
        0.0036666663803790554,
        0.004166666375852004,
        0.0046666663703156435,
    ],
    [
        0.0024999995986911875,
        0.002999999597180384,
        0.003499999594664544,
        0.0039999995911422035,
        0.004499999586611872,
        0.004999999581071811,
    ],
];

/// Long-run unavailability over mean times between failure 250..=1500 days; rows are bone nodes,
/// columns sensor nodes.
pub const MTBF_GRID: [[f64; 6]; 6] = [
    [
        0.013999996247822541,
        0.009999999634575818,
        0.008666666303048286,
        0.0079999996370126678,
        0.0075999996373045063,
        0.0073333329707962957,
    ],
    [
        0.010999998967576006,
        0.0069999999064993425,
        0.0056666665749622834,
        0.0049999999089233332,
        0.0045999999092136408,
        0.0043333332427045969,
    ],
    [
        0.00999999946971127,
        0.005999999566956941,
        0.0046666662515547986,
        0.003999999591154281,
        0.003599999594052247,
        0.0033333329289590105,
    ],
    [
        0.009499999645288928,
        0.005499999742448836,
        0.004166666427030887,
        0.003499999766624894,
        0.003099999769520343,
        0.002833333104425712,
    ],
    [
        0.009199999726522063,
        0.005199999823630798,
        0.00386666650820337,
        0.003199999847794116,
        0.0027999998506880288,
        0.0025333331855925435,
    ],
    [
        0.008999999770640447,
        0.00499999986771498,
        0.003666666552281334,
        0.0029999998918698125,
        0.0025999998947627122,
        0.002333333229666673,
    ],
];
