#include <stdio.h>

/* Separate the even and odd elements of an array. */
int main()
{
    int numbers[12] = {4, 9, 15, 22, 8, 13, 6, 1, 30, 27, 11, 2};
    int even[12], odd[12];
    int n = 12, i;
    int even_count = 0, odd_count = 0;
    int even_sum = 0, odd_sum = 0;

    for (i = 0; i < n; i++) {
        if (numbers[i] % 2 == 0) {
            even[even_count] = numbers[i];
            even_count++;
            even_sum += numbers[i];
        } else {
            odd[odd_count] = numbers[i];
            odd_count++;
            odd_sum += numbers[i];
        }
    }

    printf("Even elements: ");
    for (i = 0; i < even_count; i++)
        printf("%d ", even[i]);
    printf("\nOdd elements: ");
    for (i = 0; i < odd_count; i++)
        printf("%d ", odd[i]);
    printf("\n");
    printf("Even sum = %d, odd sum = %d\n", even_sum, odd_sum);
    if (even_count > odd_count)
        printf("More even numbers\n");
    else
        printf("More odd numbers (or equal)\n");
    return 0;
}
