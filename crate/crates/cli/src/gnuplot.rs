//! Companion gnuplot scripts. Each expects to be run from the output directory.

pub fn convergence() -> String {
    "set datafile separator ','\n\
     set key autotitle columnhead\n\
     set xlabel 'iteration'\n\
     set ylabel 'NWImSL (dB)'\n\
     set grid\n\
     set terminal pngcairo size 900,600\n\
     set output 'convergence.png'\n\
     plot 'convergence.csv' using 1:3 with lines lw 2\n"
        .to_string()
}

pub fn af_heatmap(csv: &str, title: &str) -> String {
    let png = csv.trim_end_matches(".csv");
    format!(
        "set datafile separator ','\n\
         set xlabel 'tau'\n\
         set ylabel 'omega'\n\
         set title '{title}'\n\
         set view map\n\
         set palette rgbformulae 33,13,10\n\
         set terminal pngcairo size 800,700\n\
         set output '{png}.png'\n\
         plot '{csv}' every ::1 using 1:2:3 with image notitle\n"
    )
}

pub fn roc() -> String {
    "set datafile separator ','\n\
     set xlabel 'P_FA'\n\
     set ylabel 'P_D'\n\
     set logscale x\n\
     set grid\n\
     set terminal pngcairo size 900,600\n\
     set output 'roc.png'\n\
     plot 'roc.csv' every ::1 using 2:3 with linespoints title 'P_D'\n"
        .to_string()
}

pub fn nmse() -> String {
    "set datafile separator ','\n\
     set xlabel 'SNR (dB)'\n\
     set ylabel 'MSE (bins^2)'\n\
     set logscale y\n\
     set grid\n\
     set terminal pngcairo size 900,600\n\
     set output 'nmse.png'\n\
     plot 'nmse.csv' every ::1 using 1:2 with linespoints title 'range', \\\n\
     \x20    '' every ::1 using 1:3 with linespoints title 'speed', \\\n\
     \x20    '' every ::1 using 1:4 with lines dt 2 title 'CRLB range', \\\n\
     \x20    '' every ::1 using 1:5 with lines dt 2 title 'CRLB speed', \\\n\
     \x20    '' every ::1 using 1:6 with lines dt 3 title 'SB'\n"
        .to_string()
}

pub fn bench() -> String {
    "set datafile separator ','\n\
     set xlabel 'N'\n\
     set ylabel 'time (us)'\n\
     set logscale xy\n\
     set grid\n\
     set terminal pngcairo size 900,600\n\
     set output 'bench.png'\n\
     plot 'bench.csv' every ::1 using 1:2 with linespoints title 'flag search', \\\n\
     \x20    '' every ::1 using 1:3 with linespoints title 'exhaustive'\n"
        .to_string()
}
