// Pronunciations follow CMUdict with stress removed.

namespace multipa::detail {

extern const char* const kBuiltinLexicon;

const char* const kBuiltinLexicon = R"LEX(
;;; built-in lexicon
A  AH
ABOUT  AH B AW T
AFTER  AE F T ER
AGAIN  AH G EH N
ALL  AO L
ALWAYS  AO L W EY Z
AN  AE N
AND  AH N D
ANIMAL  AE N AH M AH L
APPLE  AE P AH L
ARE  AA R
AT  AE T
BACK  B AE K
BAG  B AE G
BEAR  B EH R
BECAUSE  B IH K AH Z
BED  B EH D
BEST  B EH S T
BIG  B IH G
BIRD  B ER D
BLUE  B L UW
BOOK  B UH K
BOX  B AA K S
BOY  B OY
BREAD  B R EH D
BROTHER  B R AH DH ER
BUS  B AH S
BUT  B AH T
BUY  B AY
CALL  K AO L
CAN  K AE N
CAR  K AA R
CAT  K AE T
CHAIR  CH EH R
CHILD  CH AY L D
CITY  S IH T IY
CLASS  K L AE S
COFFEE  K AO F IY
COLD  K OW L D
COME  K AH M
DAY  D EY
DINNER  D IH N ER
DO  D UW
DOG  D AO G
DOOR  D AO R
DRINK  D R IH NG K
EAT  IY T
EVERY  EH V R IY
FAMILY  F AE M AH L IY
FAST  F AE S T
FATHER  F AA DH ER
FIND  F AY N D
FISH  F IH SH
FOOD  F UW D
FOR  F AO R
FRIEND  F R EH N D
FROM  F R AH M
GAME  G EY M
GIRL  G ER L
GIVE  G IH V
GO  G OW
GOOD  G UH D
GREEN  G R IY N
HAPPY  HH AE P IY
HAS  HH AE Z
HAVE  HH AE V
HE  HH IY
HER  HH ER
HOME  HH OW M
HOUSE  HH AW S
I  AY
IN  IH N
IS  IH Z
IT  IH T
JUICE  JH UW S
JUMP  JH AH M P
KEEP  K IY P
KITCHEN  K IH CH AH N
LIKE  L AY K
LITTLE  L IH T AH L
LOOK  L UH K
LOVE  L AH V
MAKE  M EY K
MANY  M EH N IY
ME  M IY
MILK  M IH L K
MORNING  M AO R N IH NG
MOTHER  M AH DH ER
MUSIC  M Y UW Z IH K
MY  M AY
NEED  N IY D
NEW  N UW
NIGHT  N AY T
NOT  N AA T
NOW  N AW
OF  AH V
OLD  OW L D
ON  AA N
ONE  W AH N
OPEN  OW P AH N
OUR  AW ER
OUT  AW T
PARK  P AA R K
PEOPLE  P IY P AH L
PLAY  P L EY
PLEASE  P L IY Z
RED  R EH D
READ  R IY D
RUN  R AH N
SAID  S EH D
SCHOOL  S K UW L
SEE  S IY
SHE  SH IY
SHIP  SH IH P
SING  S IH NG
SISTER  S IH S T ER
SIT  S IH T
SLEEP  S L IY P
SMALL  S M AO L
SOME  S AH M
SONG  S AO NG
STREET  S T R IY T
SUMMER  S AH M ER
SUN  S AH N
TABLE  T EY B AH L
TAKE  T EY K
TALK  T AO K
TEA  T IY
TEACHER  T IY CH ER
THAT  DH AE T
THE  DH AH
THEY  DH EY
THINK  TH IH NG K
THIS  DH IH S
THREE  TH R IY
TIME  T AY M
TO  T UW
TODAY  T AH D EY
TOMORROW  T AH M AA R OW
TREE  T R IY
TWO  T UW
UNDER  AH N D ER
VERY  V EH R IY
WALK  W AO K
WANT  W AA N T
WATER  W AO T ER
WE  W IY
WEATHER  W EH DH ER
WENT  W EH N T
WHAT  W AH T
WHERE  W EH R
WHITE  W AY T
WINDOW  W IH N D OW
WITH  W IH DH
WORK  W ER K
YELLOW  Y EH L OW
YES  Y EH S
YOU  Y UW
YOUR  Y AO R
ZOO  Z UW
)LEX";

}  // namespace multipa::detail
