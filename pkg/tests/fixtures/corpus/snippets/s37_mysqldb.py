import mysqldb

print(mysqldb)
