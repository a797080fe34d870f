// Generated by scripts/gen_quadrature.py; do not edit by hand.
// (points, weights) on the reference triangle (0,0)-(1,0)-(0,1);
// weights sum to 1/2. Verified against exact monomial integrals.
// degree 1: 1 points, max monomial error 0.00e+00
pub(super) const TRI_D1: [[f64; 3]; 1] = [[3.3333333333333331e-01, 3.3333333333333331e-01, 5.0000000000000000e-01]];
// degree 2: 3 points, max monomial error 1.67e-16
pub(super) const TRI_D2: [[f64; 3]; 3] = [[1.6666666666666666e-01, 1.6666666666666666e-01, 1.6666666666666666e-01], [6.6666666666666663e-01, 1.6666666666666666e-01, 1.6666666666666666e-01], [1.6666666666666666e-01, 6.6666666666666663e-01, 1.6666666666666666e-01]];
// degree 3: 4 points, max monomial error 2.78e-16
pub(super) const TRI_D3: [[f64; 3]; 4] = [[1.5505102572168217e-01, 1.7855872826361643e-01, 1.5902069087198858e-01], [1.5505102572168217e-01, 6.6639024601470143e-01, 1.5902069087198858e-01], [6.4494897427831788e-01, 7.5031110222608111e-02, 9.0979309128011415e-02], [6.4494897427831788e-01, 2.8001991549907401e-01, 9.0979309128011415e-02]];
// degree 4: 9 points, max monomial error 4.16e-16
pub(super) const TRI_D4: [[f64; 3]; 9] = [[8.8587959512703929e-02, 1.0271765480962626e-01, 5.5814420483044358e-02], [8.8587959512703929e-02, 4.5570602024364804e-01, 8.9303072772870876e-02], [8.8587959512703929e-02, 8.0869438567766982e-01, 5.5814420483044358e-02], [4.0946686444073477e-01, 6.6554067839164496e-02, 6.3678085099885082e-02], [4.0946686444073477e-01, 2.9526656777963262e-01, 1.0188493615981602e-01], [4.0946686444073477e-01, 5.2397906772010072e-01, 6.3678085099885082e-02], [7.8765946176084700e-01, 2.3931132287080620e-02, 1.9396383305959500e-02], [7.8765946176084700e-01, 1.0617026911957650e-01, 3.1034213289535168e-02], [7.8765946176084700e-01, 1.8840940595207237e-01, 1.9396383305959500e-02]];
// degree 5: 9 points, max monomial error 4.37e-16
pub(super) const TRI_D5: [[f64; 3]; 9] = [[8.8587959512703929e-02, 1.0271765480962626e-01, 5.5814420483044358e-02], [8.8587959512703929e-02, 4.5570602024364804e-01, 8.9303072772870876e-02], [8.8587959512703929e-02, 8.0869438567766982e-01, 5.5814420483044358e-02], [4.0946686444073477e-01, 6.6554067839164496e-02, 6.3678085099885082e-02], [4.0946686444073477e-01, 2.9526656777963262e-01, 1.0188493615981602e-01], [4.0946686444073477e-01, 5.2397906772010072e-01, 6.3678085099885082e-02], [7.8765946176084700e-01, 2.3931132287080620e-02, 1.9396383305959500e-02], [7.8765946176084700e-01, 1.0617026911957650e-01, 3.1034213289535168e-02], [7.8765946176084700e-01, 1.8840940595207237e-01, 1.9396383305959500e-02]];
// degree 6: 16 points, max monomial error 1.64e-15
pub(super) const TRI_D6: [[f64; 3]; 16] = [[5.7104196114517725e-02, 6.5466994555014452e-02, 2.3568368193382400e-02], [5.7104196114517725e-02, 3.1116455224435702e-01, 4.4185088522361859e-02], [5.7104196114517725e-02, 6.3173125164112520e-01, 4.4185088522361859e-02], [5.7104196114517725e-02, 8.7742880933046774e-01, 2.3568368193382400e-02], [2.7684301363812380e-01, 5.0210123211369778e-02, 3.5388067898085893e-02], [2.7684301363812380e-01, 2.3864865973144292e-01, 6.6344216107049658e-02], [2.7684301363812380e-01, 4.8450832663043325e-01, 6.6344216107049658e-02], [2.7684301363812380e-01, 6.7294686315050634e-01, 3.5388067898085893e-02], [5.8359043236891683e-01, 2.8912084224389012e-02, 2.2584049282369907e-02], [5.8359043236891683e-01, 1.3741910413457437e-01, 4.2339724521746260e-02], [5.8359043236891683e-01, 2.7899046349650880e-01, 4.2339724521746260e-02], [5.8359043236891683e-01, 3.8749748340669415e-01, 2.2584049282369907e-02], [8.6024013565621948e-01, 9.7037851269461094e-03, 5.4232259105252536e-03], [8.6024013565621948e-01, 4.6122079906452035e-02, 1.0167259564478788e-02], [8.6024013565621948e-01, 9.3637784437328481e-02, 1.0167259564478788e-02], [8.6024013565621948e-01, 1.3005607921683440e-01, 5.4232259105252536e-03]];
// degree 7: 16 points, max monomial error 1.64e-15
pub(super) const TRI_D7: [[f64; 3]; 16] = [[5.7104196114517725e-02, 6.5466994555014452e-02, 2.3568368193382400e-02], [5.7104196114517725e-02, 3.1116455224435702e-01, 4.4185088522361859e-02], [5.7104196114517725e-02, 6.3173125164112520e-01, 4.4185088522361859e-02], [5.7104196114517725e-02, 8.7742880933046774e-01, 2.3568368193382400e-02], [2.7684301363812380e-01, 5.0210123211369778e-02, 3.5388067898085893e-02], [2.7684301363812380e-01, 2.3864865973144292e-01, 6.6344216107049658e-02], [2.7684301363812380e-01, 4.8450832663043325e-01, 6.6344216107049658e-02], [2.7684301363812380e-01, 6.7294686315050634e-01, 3.5388067898085893e-02], [5.8359043236891683e-01, 2.8912084224389012e-02, 2.2584049282369907e-02], [5.8359043236891683e-01, 1.3741910413457437e-01, 4.2339724521746260e-02], [5.8359043236891683e-01, 2.7899046349650880e-01, 4.2339724521746260e-02], [5.8359043236891683e-01, 3.8749748340669415e-01, 2.2584049282369907e-02], [8.6024013565621948e-01, 9.7037851269461094e-03, 5.4232259105252536e-03], [8.6024013565621948e-01, 4.6122079906452035e-02, 1.0167259564478788e-02], [8.6024013565621948e-01, 9.3637784437328481e-02, 1.0167259564478788e-02], [8.6024013565621948e-01, 1.3005607921683440e-01, 5.4232259105252536e-03]];
// degree 8: 25 points, max monomial error 1.87e-15
pub(super) const TRI_D8: [[f64; 3]; 25] = [[3.9809857051468722e-02, 4.5042593569803738e-02, 1.1465080351592518e-02], [3.9809857051468722e-02, 2.2157860955237921e-01, 2.3161221929498342e-02], [3.9809857051468722e-02, 4.8009507147426567e-01, 2.7528985664469759e-02], [3.9809857051468722e-02, 7.3861153339615204e-01, 2.3161221929498342e-02], [3.9809857051468722e-02, 9.1514754937872755e-01, 1.1465080351592518e-02], [1.9801341787360821e-01, 3.7621252345111204e-02, 1.9804083132047359e-02], [1.9801341787360821e-01, 1.8507071026738944e-01, 4.0007287386160460e-02], [1.9801341787360821e-01, 4.0099329106319592e-01, 4.7551897057954054e-02], [1.9801341787360821e-01, 6.1691587185900232e-01, 4.0007287386160460e-02], [1.9801341787360821e-01, 7.6436532978128058e-01, 1.9804083132047359e-02], [4.3797481024738616e-01, 2.6364644944470925e-02, 1.7341506431365696e-02], [4.3797481024738616e-01, 1.2969593678225411e-01, 3.5032504503371732e-02], [4.3797481024738616e-01, 2.8101259487630692e-01, 4.1638965215194987e-02], [4.3797481024738616e-01, 4.3232925297035968e-01, 3.5032504503371732e-02], [4.3797481024738616e-01, 5.3566054480814285e-01, 1.7341506431365696e-02], [6.9546427335363614e-01, 1.4285794395571387e-02, 8.7554991821638291e-03], [6.9546427335363614e-01, 7.0276292008281713e-02, 1.7687452110483469e-02], [6.9546427335363614e-01, 1.5226786332318193e-01, 2.1022967487322082e-02], [6.9546427335363614e-01, 2.3425943463808213e-01, 1.7687452110483469e-02], [6.9546427335363614e-01, 2.9024993225079243e-01, 8.7554991821638291e-03], [9.0146491420117358e-01, 4.6222884650464298e-03, 1.8655521668778402e-03], [9.0146491420117358e-01, 2.2738483063764033e-02, 3.7687016953276264e-03], [9.0146491420117358e-01, 4.9267542899413208e-02, 4.4794067972813659e-03], [9.0146491420117358e-01, 7.5796602735062377e-02, 3.7687016953276264e-03], [9.0146491420117358e-01, 9.3912797333779982e-02, 1.8655521668778402e-03]];
// degree 9: 25 points, max monomial error 1.91e-15
pub(super) const TRI_D9: [[f64; 3]; 25] = [[3.9809857051468722e-02, 4.5042593569803738e-02, 1.1465080351592518e-02], [3.9809857051468722e-02, 2.2157860955237921e-01, 2.3161221929498342e-02], [3.9809857051468722e-02, 4.8009507147426567e-01, 2.7528985664469759e-02], [3.9809857051468722e-02, 7.3861153339615204e-01, 2.3161221929498342e-02], [3.9809857051468722e-02, 9.1514754937872755e-01, 1.1465080351592518e-02], [1.9801341787360821e-01, 3.7621252345111204e-02, 1.9804083132047359e-02], [1.9801341787360821e-01, 1.8507071026738944e-01, 4.0007287386160460e-02], [1.9801341787360821e-01, 4.0099329106319592e-01, 4.7551897057954054e-02], [1.9801341787360821e-01, 6.1691587185900232e-01, 4.0007287386160460e-02], [1.9801341787360821e-01, 7.6436532978128058e-01, 1.9804083132047359e-02], [4.3797481024738616e-01, 2.6364644944470925e-02, 1.7341506431365696e-02], [4.3797481024738616e-01, 1.2969593678225411e-01, 3.5032504503371732e-02], [4.3797481024738616e-01, 2.8101259487630692e-01, 4.1638965215194987e-02], [4.3797481024738616e-01, 4.3232925297035968e-01, 3.5032504503371732e-02], [4.3797481024738616e-01, 5.3566054480814285e-01, 1.7341506431365696e-02], [6.9546427335363614e-01, 1.4285794395571387e-02, 8.7554991821638291e-03], [6.9546427335363614e-01, 7.0276292008281713e-02, 1.7687452110483469e-02], [6.9546427335363614e-01, 1.5226786332318193e-01, 2.1022967487322082e-02], [6.9546427335363614e-01, 2.3425943463808213e-01, 1.7687452110483469e-02], [6.9546427335363614e-01, 2.9024993225079243e-01, 8.7554991821638291e-03], [9.0146491420117358e-01, 4.6222884650464298e-03, 1.8655521668778402e-03], [9.0146491420117358e-01, 2.2738483063764033e-02, 3.7687016953276264e-03], [9.0146491420117358e-01, 4.9267542899413208e-02, 4.4794067972813659e-03], [9.0146491420117358e-01, 7.5796602735062377e-02, 3.7687016953276264e-03], [9.0146491420117358e-01, 9.3912797333779982e-02, 1.8655521668778402e-03]];
// degree 10: 36 points, max monomial error 1.24e-15
pub(super) const TRI_D10: [[f64; 3]; 36] = [[2.9316427159784941e-02, 3.2775366614459879e-02, 6.1942653526588613e-03], [2.9316427159784941e-02, 1.6442924159482744e-01, 1.3043394330082867e-02], [2.9316427159784941e-02, 3.6952992437237664e-01, 1.6917505680012716e-02], [2.9316427159784941e-02, 6.0115364846783836e-01, 1.6917505680012716e-02], [2.9316427159784941e-02, 8.0625433124538759e-01, 1.3043394330082867e-02], [2.9316427159784941e-02, 9.3790820622575510e-01, 6.1942653526588613e-03], [1.4807859966848430e-01, 2.8765333012559118e-02, 1.1610874766997507e-02], [1.4807859966848430e-01, 1.4431148695041665e-01, 2.4449262258057821e-02], [1.4807859966848430e-01, 3.2431830458877597e-01, 3.1711111590704007e-02], [1.4807859966848430e-01, 5.2760309574273967e-01, 3.1711111590704007e-02], [1.4807859966848430e-01, 7.0760991338109902e-01, 2.4449262258057821e-02], [1.4807859966848430e-01, 8.2315606731895652e-01, 1.1610874766997507e-02], [3.3698469028115430e-01, 2.2386872978030627e-02, 1.2060606404265088e-02], [3.3698469028115430e-01, 1.1231168178095370e-01, 2.5396271589047635e-02], [3.3698469028115430e-01, 2.5240356807651798e-01, 3.2939398900786683e-02], [3.3698469028115430e-01, 4.1061174164232772e-01, 3.2939398900786683e-02], [3.3698469028115430e-01, 5.5070362793789196e-01, 2.5396271589047635e-02], [3.3698469028115430e-01, 6.4062843674081504e-01, 1.2060606404265088e-02], [5.5867151877155019e-01, 1.4901563366671153e-02, 8.4515357969431083e-03], [5.5867151877155019e-01, 7.4758973462649092e-02, 1.7796575997026262e-02], [5.5867151877155019e-01, 1.6800951912119183e-01, 2.3082463651358229e-02], [5.5867151877155019e-01, 2.7331896210725798e-01, 2.3082463651358229e-02], [5.5867151877155019e-01, 3.6656950776580072e-01, 1.7796575997026262e-02], [5.5867151877155019e-01, 4.2642691786177866e-01, 8.4515357969431083e-03], [7.6923386203005450e-01, 7.7918747012864290e-03, 3.7652982126916679e-03], [7.6923386203005450e-01, 3.9090700732824245e-02, 7.9286673337964804e-03], [7.6923386203005450e-01, 8.7850454975997180e-02, 1.0283617228766331e-02], [7.6923386203005450e-01, 1.4291568299394830e-01, 1.0283617228766331e-02], [7.6923386203005450e-01, 1.9167543723712124e-01, 7.9286673337964804e-03], [7.6923386203005450e-01, 2.2297426326865907e-01, 3.7652982126916679e-03], [9.2694567131974104e-01, 2.4666971526702448e-03, 7.4854256123631734e-04], [9.2694567131974104e-01, 1.2375060417440052e-02, 1.5762217540235878e-03], [9.2694567131974104e-01, 2.7811082115360607e-02, 2.0443865915448591e-03], [9.2694567131974104e-01, 4.5243246564898358e-02, 2.0443865915448591e-03], [9.2694567131974104e-01, 6.0679268262818907e-02, 1.5762217540235878e-03], [9.2694567131974104e-01, 7.0587631527588721e-02, 7.4854256123631734e-04]];

// Gauss-Legendre rules on [0, 1]; columns are (point, weight).
// degree 1: 1 points, max monomial error 0.00e+00
pub(super) const EDGE_D1: [[f64; 2]; 1] = [[5.0000000000000000e-01, 1.0000000000000000e+00]];
// degree 2: 2 points, max monomial error 1.67e-16
pub(super) const EDGE_D2: [[f64; 2]; 2] = [[2.1132486540518713e-01, 5.0000000000000000e-01], [7.8867513459481287e-01, 5.0000000000000000e-01]];
// degree 3: 2 points, max monomial error 1.67e-16
pub(super) const EDGE_D3: [[f64; 2]; 2] = [[2.1132486540518713e-01, 5.0000000000000000e-01], [7.8867513459481287e-01, 5.0000000000000000e-01]];
// degree 4: 3 points, max monomial error 2.78e-16
pub(super) const EDGE_D4: [[f64; 2]; 3] = [[1.1270166537925830e-01, 2.7777777777777790e-01], [5.0000000000000000e-01, 4.4444444444444414e-01], [8.8729833462074170e-01, 2.7777777777777790e-01]];
// degree 5: 3 points, max monomial error 3.33e-16
pub(super) const EDGE_D5: [[f64; 2]; 3] = [[1.1270166537925830e-01, 2.7777777777777790e-01], [5.0000000000000000e-01, 4.4444444444444414e-01], [8.8729833462074170e-01, 2.7777777777777790e-01]];
// degree 6: 4 points, max monomial error 3.89e-16
pub(super) const EDGE_D6: [[f64; 2]; 4] = [[6.9431844202973714e-02, 1.7392742256872690e-01], [3.3000947820757187e-01, 3.2607257743127310e-01], [6.6999052179242813e-01, 3.2607257743127310e-01], [9.3056815579702623e-01, 1.7392742256872690e-01]];
// degree 7: 4 points, max monomial error 5.55e-16
pub(super) const EDGE_D7: [[f64; 2]; 4] = [[6.9431844202973714e-02, 1.7392742256872690e-01], [3.3000947820757187e-01, 3.2607257743127310e-01], [6.6999052179242813e-01, 3.2607257743127310e-01], [9.3056815579702623e-01, 1.7392742256872690e-01]];
// degree 8: 5 points, max monomial error 7.77e-16
pub(super) const EDGE_D8: [[f64; 2]; 5] = [[4.6910077030668018e-02, 1.1846344252809449e-01], [2.3076534494715845e-01, 2.3931433524968326e-01], [5.0000000000000000e-01, 2.8444444444444450e-01], [7.6923465505284150e-01, 2.3931433524968326e-01], [9.5308992296933193e-01, 1.1846344252809449e-01]];
// degree 9: 5 points, max monomial error 9.71e-16
pub(super) const EDGE_D9: [[f64; 2]; 5] = [[4.6910077030668018e-02, 1.1846344252809449e-01], [2.3076534494715845e-01, 2.3931433524968326e-01], [5.0000000000000000e-01, 2.8444444444444450e-01], [7.6923465505284150e-01, 2.3931433524968326e-01], [9.5308992296933193e-01, 1.1846344252809449e-01]];
// degree 10: 6 points, max monomial error 7.63e-16
pub(super) const EDGE_D10: [[f64; 2]; 6] = [[3.3765242898423975e-02, 8.5662246189585081e-02], [1.6939530676686776e-01, 1.8038078652406928e-01], [3.8069040695840151e-01, 2.3395696728634560e-01], [6.1930959304159849e-01, 2.3395696728634560e-01], [8.3060469323313224e-01, 1.8038078652406928e-01], [9.6623475710157603e-01, 8.5662246189585081e-02]];
// degree 11: 6 points, max monomial error 7.63e-16
pub(super) const EDGE_D11: [[f64; 2]; 6] = [[3.3765242898423975e-02, 8.5662246189585081e-02], [1.6939530676686776e-01, 1.8038078652406928e-01], [3.8069040695840151e-01, 2.3395696728634560e-01], [6.1930959304159849e-01, 2.3395696728634560e-01], [8.3060469323313224e-01, 1.8038078652406928e-01], [9.6623475710157603e-01, 8.5662246189585081e-02]];
