"""Exact rational coordinates of the builtin domains."""

THREE_PATCH_VERTICES = [
    ("2", "13/10"), ("21/10", "7/10"), ("12/5", "9/10"), ("5/2", "8/5"),
    ("37/20", "19/10"), ("27/20", "7/5"), ("17/10", "4/5"),
]

FIVE_PATCH_VERTICES = [
    ("7", "6"), ("57/5", "6"), ("113/10", "33/4"), ("93/10", "199/20"),
    ("31/5", "45/4"), ("37/10", "181/20"), ("2", "127/20"), ("17/5", "7/2"),
    ("29/5", "27/20"), ("89/10", "37/20"), ("219/20", "63/20"),
]

# bicubic C^2 nets on the knot vector (0,0,0,0,1/4,1/2,3/4,1,1,1,1);
# NETS[i][j1][j2] is the control point c^{(i)}_{j1,j2}
G2_THREE_PATCH_NETS = [
    [
        [("119/15", "14/5"), ("5971/720", "169/60"), ("721/80", "57/20"), ("1211/120", "29/10"), ("2681/240", "59/20"), ("8561/720", "179/60"), ("49/4", "3")],
        [("707/90", "77/30"), ("71141/8640", "1859/720"), ("2877/320", "209/80"), ("14581/1440", "319/120"), ("32431/2880", "649/240"), ("103831/8640", "1969/720"), ("595/48", "11/4")],
        [("77/10", "21/10"), ("2597/320", "169/80"), ("2863/320", "171/80"), ("1631/160", "87/40"), ("3661/320", "177/80"), ("3927/320", "179/80"), ("203/16", "9/4")],
        [("112/15", "7/5"), ("11431/1440", "169/120"), ("1421/160", "57/40"), ("259/25", "63/50"), ("294/25", "63/50"), ("322/25", "77/50"), ("336/25", "847/500")],
        [("217/30", "7/10"), ("22351/2880", "169/240"), ("2821/320", "57/80"), ("259/25", "7/25"), ("609/50", "7/50"), ("336/25", "7/10"), ("1757/125", "91/100")],
        [("637/90", "7/30"), ("66031/8640", "169/720"), ("2807/320", "19/80"), ("21/2", "-14/25"), ("609/50", "-49/50"), ("336/25", "-14/25"), ("1407/100", "-1/10")],
        [("7", "0"), ("91/12", "0"), ("35/4", "0"), ("21/2", "-112/125"), ("49/4", "-77/50"), ("161/12", "-49/45"), ("14", "-7/10")],
    ],
    [
        [("119/15", "14/5"), ("70/9", "91/30"), ("112/15", "7/2"), ("7", "21/5"), ("98/15", "49/10"), ("56/9", "161/30"), ("91/15", "28/5")],
        [("5971/720", "169/60"), ("70231/8640", "2209/720"), ("22463/2880", "857/240"), ("1169/160", "173/40"), ("19621/2880", "1219/240"), ("56021/8640", "4019/720"), ("455/72", "35/6")],
        [("721/80", "57/20"), ("8477/960", "251/80"), ("2709/320", "297/80"), ("1267/160", "183/40"), ("2359/320", "87/16"), ("6727/960", "481/80"), ("273/40", "63/10")],
        [("1211/120", "29/10"), ("14231/1440", "389/120"), ("4543/480", "157/40"), ("441/50", "126/25"), ("203/25", "154/25"), ("189/25", "343/50"), ("3661/500", "3661/500")],
        [("2681/240", "59/20"), ("31493/2880", "803/240"), ("2009/192", "331/80"), ("497/50", "273/50"), ("231/25", "7"), ("413/50", "196/25"), ("994/125", "4137/500")],
        [("8561/720", "179/60"), ("100541/8640", "2459/720"), ("32053/2880", "1027/240"), ("266/25", "287/50"), ("511/50", "371/50"), ("231/25", "413/50"), ("217/25", "259/30")],
        [("49/4", "3"), ("959/80", "69/20"), ("917/80", "87/20"), ("5593/500", "301/50"), ("5341/500", "763/100"), ("777/80", "101/12"), ("91/10", "35/4")],
    ],
    [
        [("119/15", "14/5"), ("707/90", "77/30"), ("77/10", "21/10"), ("112/15", "7/5"), ("217/30", "7/10"), ("637/90", "7/30"), ("7", "0")],
        [("70/9", "91/30"), ("3311/432", "1001/360"), ("119/16", "91/40"), ("511/72", "91/60"), ("973/144", "91/120"), ("2821/432", "91/360"), ("77/12", "0")],
        [("112/15", "7/2"), ("5243/720", "77/24"), ("553/80", "21/8"), ("763/120", "7/4"), ("1393/240", "7/8"), ("3913/720", "7/24"), ("21/4", "0")],
        [("7", "21/5"), ("161/24", "77/20"), ("49/8", "63/20"), ("133/25", "21/10"), ("231/50", "28/25"), ("21/5", "7/50"), ("413/100", "-21/100")],
        [("98/15", "49/10"), ("4417/720", "539/120"), ("427/80", "147/40"), ("21/5", "14/5"), ("84/25", "91/50"), ("77/25", "14/25"), ("301/100", "-7/250")],
        [("56/9", "161/30"), ("2485/432", "1771/360"), ("77/16", "161/40"), ("7/2", "7/2"), ("119/50", "147/50"), ("21/10", "77/50"), ("119/60", "21/25")],
        [("91/15", "28/5"), ("1001/180", "77/15"), ("91/20", "21/5"), ("392/125", "987/250"), ("987/500", "1729/500"), ("14/9", "133/60"), ("7/5", "7/5")],
    ],
]
